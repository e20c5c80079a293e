//! Fixed scenarios shared by the criterion benches.

use ris_ee::{
    dinkelbach, draw_channel, effective_channel, t_coefficients, AllocProblem, ChannelRealization, RisConfig,
    SystemConfig,
};

pub struct Fixture {
    pub cfg: SystemConfig,
    pub chan: ChannelRealization,
    /// Allocation problem at the all-off configuration.
    pub alloc: AllocProblem,
    /// Its Dinkelbach powers, the input to a RIS step.
    pub p: Vec<f64>,
}

/// Default scenario with an `n1 × n2` RIS and the channel drawn from `seed`.
pub fn fixture(n1: usize, n2: usize, seed: u64) -> Fixture {
    let cfg = SystemConfig { n1, n2, ..SystemConfig::default() };
    let chan = draw_channel(&cfg, seed);
    let off = RisConfig::new(vec![1; cfg.n()]).unwrap();
    let t = t_coefficients(&effective_channel(&chan, &off).unwrap()).unwrap();
    let alloc = AllocProblem::from_config(&cfg, t, 0).unwrap();
    let p = dinkelbach(&alloc).unwrap().p;
    Fixture { cfg, chan, alloc, p }
}
