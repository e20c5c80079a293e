//! Reference RIS configurations and exhaustive oracles.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::substream;
use crate::error::{Error, Result};
use crate::gradient::{choose_start, GradSearchParams, RisObjective, SearchResult};
use crate::model::{effective_channel, metrics, t_coefficients, ChannelRealization, PowerAllocation, RisConfig, SystemConfig};
use crate::power::{dinkelbach, AllocProblem};

const STREAM_RANDOM_RIS: u64 = 0x5249;

/// Largest `N` accepted by [`brute_force_g`].
pub const G_ORACLE_CAP: usize = 20;
/// Largest `N` accepted by [`brute_force_ee`].
pub const EE_ORACLE_CAP: usize = 16;

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_q: RisConfig,
    /// Watts for the `g` oracle, bits/Joule for the EE oracle.
    pub best_value: f64,
    pub evaluated_count: u64,
    pub infeasible_count: u64,
    /// Optimal powers at `best_q` (EE oracle only).
    pub allocation: Option<PowerAllocation>,
}

/// i.i.d. uniform `±1` configuration.
pub fn random_ris(n: usize, seed: u64) -> Result<RisConfig> {
    if n == 0 {
        return Err(Error::InvalidConfig("RIS needs at least one element".into()));
    }
    let mut rng = substream(seed, STREAM_RANDOM_RIS, 0);
    RisConfig::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
}

pub fn all_off_ris(n: usize) -> RisConfig {
    RisConfig::all_off(n)
}

/// Element-by-element sweeps `n = 0…N−1`, flipping `q_n` whenever that keeps
/// the budget and strictly lowers `g`. Stops after a sweep with no flip.
///
/// The start is chosen as in the gradient search, from `q0`, all-OFF, all-ON
/// and `params.restarts` seeded draws.
pub fn successive_update(
    obj: &RisObjective<'_>,
    q0: Option<&RisConfig>,
    max_sweeps: usize,
    params: &GradSearchParams,
) -> Result<SearchResult> {
    let (mut q, mut cur) = choose_start(obj, q0, params.restarts, params.seed)?;
    let mut trace = vec![cur.objective];
    for _ in 0..max_sweeps {
        let mut kept = 0;
        for idx in 0..q.len() {
            let cand = q.flipped(idx);
            let ev = obj.evaluate(&cand);
            if ev.feasible && ev.objective < cur.objective {
                q = cand;
                cur = ev;
                kept += 1;
            }
        }
        trace.push(cur.objective);
        if kept == 0 {
            break;
        }
    }
    Ok(SearchResult { ris: q, objective: cur.objective, tx_power: cur.tx_power, trace })
}

/// Running best of a parallel enumeration. Ties go to the smaller index,
/// which is the lexicographically smaller `q`.
#[derive(Clone, Copy)]
struct Best {
    value: f64,
    index: u64,
    infeasible: u64,
}

impl Best {
    const EMPTY: Best = Best { value: f64::NAN, index: u64::MAX, infeasible: 0 };

    fn merge(self, other: Best, better: impl Fn(f64, f64) -> bool) -> Best {
        let infeasible = self.infeasible + other.infeasible;
        let pick_other = if self.value.is_nan() {
            true
        } else if other.value.is_nan() {
            false
        } else {
            better(other.value, self.value) || (other.value == self.value && other.index < self.index)
        };
        let b = if pick_other { other } else { self };
        Best { infeasible, ..b }
    }
}

fn enumerate(n: usize, score: impl Fn(u64) -> Option<f64> + Sync, better: impl Fn(f64, f64) -> bool + Sync + Copy) -> Best {
    (0..1u64 << n)
        .into_par_iter()
        .map(|idx| match score(idx) {
            Some(v) => Best { value: v, index: idx, infeasible: 0 },
            None => Best { infeasible: 1, ..Best::EMPTY },
        })
        .reduce(|| Best::EMPTY, |a, b| a.merge(b, better))
}

/// Exact minimizer of `g` over every feasible `q ∈ {±1}^N`.
pub fn brute_force_g(chan: &ChannelRealization, p: &[f64], p0: f64, pmax: f64) -> Result<OracleResult> {
    let n = chan.n();
    if n > G_ORACLE_CAP {
        return Err(Error::CapExceeded { n, cap: G_ORACLE_CAP });
    }
    let obj = RisObjective::new(chan, p, p0, pmax);
    let best = enumerate(
        n,
        |idx| {
            let ev = obj.evaluate(&RisConfig::from_index(idx, n));
            ev.feasible.then_some(ev.objective)
        },
        |a, b| a < b,
    );
    if best.value.is_nan() {
        return Err(Error::AllInfeasible);
    }
    Ok(OracleResult {
        best_q: RisConfig::from_index(best.index, n),
        best_value: best.value,
        evaluated_count: 1 << n,
        infeasible_count: best.infeasible,
        allocation: None,
    })
}

/// Optimal powers and EE for one fixed configuration, `None` when the
/// channel is singular or the rate floors exceed the budget.
pub fn optimal_ee(cfg: &SystemConfig, chan: &ChannelRealization, ris: &RisConfig) -> Option<(f64, PowerAllocation)> {
    let t = t_coefficients(&effective_channel(chan, ris).ok()?).ok()?;
    let prob = AllocProblem::from_config(cfg, t.clone(), ris.on_count()).ok()?;
    let alloc = dinkelbach(&prob).ok()?;
    let rep = metrics(cfg, ris, &alloc.p, &t);
    rep.feasible.then_some((rep.ee, alloc))
}

/// Global EE optimum under ZF: optimal powers for every `q`, best EE kept.
pub fn brute_force_ee(cfg: &SystemConfig, chan: &ChannelRealization) -> Result<OracleResult> {
    let n = chan.n();
    if n > EE_ORACLE_CAP {
        return Err(Error::CapExceeded { n, cap: EE_ORACLE_CAP });
    }
    let best = enumerate(n, |idx| optimal_ee(cfg, chan, &RisConfig::from_index(idx, n)).map(|(ee, _)| ee), |a, b| a > b);
    if best.value.is_nan() {
        return Err(Error::AllInfeasible);
    }
    let best_q = RisConfig::from_index(best.index, n);
    let allocation = optimal_ee(cfg, chan, &best_q).map(|(_, a)| a);
    Ok(OracleResult { best_q, best_value: best.value, evaluated_count: 1 << n, infeasible_count: best.infeasible, allocation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::iid_channel;
    use crate::gradient::objective_g;

    #[test]
    fn random_ris_is_reproducible() {
        assert_eq!(random_ris(16, 3).unwrap(), random_ris(16, 3).unwrap());
        assert!(random_ris(0, 3).is_err());
    }

    #[test]
    fn random_ris_is_balanced() {
        let total: i64 = (0..10_000).map(|s| random_ris(1, s).unwrap().sum()).sum();
        assert!((total as f64 / 10_000.0).abs() < 0.05);
    }

    #[test]
    fn all_off_has_no_on_elements() {
        assert_eq!(all_off_ris(8).on_count(), 0);
    }

    #[test]
    fn two_element_oracle_matches_manual_enumeration() {
        let chan = iid_channel(2, 2, 1, 4);
        let p = [1.0];
        let out = brute_force_g(&chan, &p, 0.3, f64::INFINITY).unwrap();
        let manual = [[-1, -1], [-1, 1], [1, -1], [1, 1]]
            .map(|q| (objective_g(&chan, &p, 0.3, &RisConfig::new(q.to_vec()).unwrap()), q));
        let best = manual.iter().fold(manual[0], |a, b| if b.0 < a.0 { *b } else { a });
        assert_eq!(out.best_q.values(), &best.1);
        assert_eq!(out.best_value, best.0);
        assert_eq!(out.evaluated_count, 4);
    }

    #[test]
    fn sign_symmetric_ties_go_to_smaller_vector() {
        let chan = iid_channel(6, 3, 2, 8);
        let out = brute_force_g(&chan, &[1.0, 2.0], 0.0, f64::INFINITY).unwrap();
        // g(q) = g(−q) when P0 = 0, so the winner starts with −1.
        assert_eq!(out.best_q.values()[0], -1);
        let mirror = objective_g(&chan, &[1.0, 2.0], 0.0, &out.best_q.negated());
        assert_eq!(mirror, out.best_value);
    }

    #[test]
    fn caps_enforced() {
        let chan = iid_channel(21, 2, 1, 0);
        assert_eq!(brute_force_g(&chan, &[1.0], 0.1, 1.0).unwrap_err(), Error::CapExceeded { n: 21, cap: 20 });
        let cfg = SystemConfig { n1: 17, n2: 1, m1: 2, m2: 1, k: 1, ..SystemConfig::default() };
        let chan = iid_channel(17, 2, 1, 0);
        assert!(matches!(brute_force_ee(&cfg, &chan), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn single_sweep_on_one_element_is_exact() {
        let chan = iid_channel(1, 1, 1, 2);
        let p = [1.0];
        let obj = RisObjective::new(&chan, &p, 0.5, f64::INFINITY);
        let params = GradSearchParams { restarts: 0, ..GradSearchParams::default() };
        let out = successive_update(&obj, Some(&RisConfig::all_off(1)), 1, &params).unwrap();
        let exact = brute_force_g(&chan, &p, 0.5, f64::INFINITY).unwrap();
        assert_eq!(out.objective, exact.best_value);
    }
}
