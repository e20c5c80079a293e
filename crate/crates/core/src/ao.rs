//! Alternating optimization of the powers and the RIS configuration.
//!
//! Each iteration runs the Dinkelbach power step with the RIS fixed, then the
//! selected RIS step with the powers fixed. A RIS proposal replaces the
//! incumbent only when it meets the budget and does not lower EE, so the EE
//! trace never decreases.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{random_ris, successive_update};
use crate::error::{Error, Result};
use crate::gradient::{search_max_gradient, GradSearchParams, RisObjective};
use crate::model::{
    effective_channel, metrics, t_coefficients, ChannelRealization, EEReport, PowerAllocation, RisConfig, Stage,
    SystemConfig, TracePoint,
};
use crate::power::{dinkelbach, AllocProblem};
use crate::sdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gradient,
    Sdp,
    Random,
    AllOff,
    Successive,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Gradient, Method::Sdp, Method::Random, Method::AllOff, Method::Successive];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::Sdp => "sdp",
            Method::Random => "random",
            Method::AllOff => "all_off",
            Method::Successive => "successive",
        }
    }

    /// Baselines keep their RIS configuration fixed.
    pub fn is_fixed(self) -> bool {
        matches!(self, Method::Random | Method::AllOff)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}; expected one of gradient, sdp, random, all_off, successive")))
    }
}

/// Where the first power step starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialRis {
    /// All-OFF, falling back to all-ON and then seeded draws if its power
    /// step is infeasible.
    #[default]
    AllOff,
    Given(RisConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions {
    pub method: Method,
    pub max_ao_iters: usize,
    pub rel_ee_tol: f64,
    pub initial: InitialRis,
    /// Seeds every random choice (restarts, rounding, random baseline).
    pub seed: u64,
    pub grad: GradSearchParams,
    pub n_rounds: usize,
    pub max_sweeps: usize,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            method: Method::Gradient,
            max_ao_iters: 20,
            rel_ee_tol: 1e-6,
            initial: InitialRis::AllOff,
            seed: 0,
            grad: GradSearchParams::default(),
            n_rounds: sdp::DEFAULT_ROUNDS,
            max_sweeps: 50,
        }
    }
}

impl AoOptions {
    pub fn new(method: Method, seed: u64) -> Self {
        Self { method, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_ao_iters == 0 || !(self.rel_ee_tol > 0.0) || self.n_rounds == 0 {
            return Err(Error::InvalidConfig("AO needs max_ao_iters >= 1, rel_ee_tol > 0 and n_rounds >= 1".into()));
        }
        self.grad.validate()
    }
}

/// Result of one AO run.
#[derive(Debug, Clone, PartialEq)]
pub struct AoOutcome {
    /// Metrics at the final `(q, p)`, with one trace point per half-step.
    pub report: EEReport,
    pub ris: RisConfig,
    pub allocation: PowerAllocation,
    pub iterations: usize,
    pub converged: bool,
}

struct Operating {
    ris: RisConfig,
    t: Vec<f64>,
}

fn operating(chan: &ChannelRealization, ris: RisConfig) -> Result<Operating> {
    let t = t_coefficients(&effective_channel(chan, &ris)?)?;
    Ok(Operating { ris, t })
}

fn power_step(cfg: &SystemConfig, op: &Operating) -> Result<PowerAllocation> {
    dinkelbach(&AllocProblem::from_config(cfg, op.t.clone(), op.ris.on_count())?)
}

fn initial_state(cfg: &SystemConfig, chan: &ChannelRealization, opts: &AoOptions) -> Result<(Operating, PowerAllocation)> {
    let n = chan.n();
    let candidates: Vec<RisConfig> = match (&opts.initial, opts.method) {
        (InitialRis::Given(q), _) => vec![q.clone()],
        (_, Method::Random) => vec![random_ris(n, opts.seed)?],
        (_, Method::AllOff) => vec![RisConfig::all_off(n)],
        (InitialRis::AllOff, _) => {
            let mut c = vec![RisConfig::all_off(n), RisConfig::all_on(n)];
            for r in 0..opts.grad.restarts {
                c.push(random_ris(n, opts.seed.wrapping_add(r as u64 + 1))?);
            }
            c
        }
    };
    let single = candidates.len() == 1;
    let mut last_err = Error::NoFeasibleStart;
    for q in candidates {
        match operating(chan, q).and_then(|op| power_step(cfg, &op).map(|a| (op, a))) {
            Ok(found) => return Ok(found),
            Err(e) => last_err = e,
        }
    }
    Err(if single { last_err } else { Error::NoFeasibleStart })
}

fn half_step(iteration: usize, stage: Stage) -> impl FnOnce(Error) -> Error {
    move |e| Error::HalfStep { iteration, stage: stage.as_str(), source: Box::new(e) }
}

fn trace_point(iteration: usize, stage: Stage, rep: &EEReport) -> TracePoint {
    TracePoint { iteration, stage, se: rep.se, ee: rep.ee, tx_power: rep.tx_power, on_count: rep.on_count }
}

/// RIS proposal for fixed powers, or `None` to keep the incumbent.
fn ris_step(
    cfg: &SystemConfig,
    chan: &ChannelRealization,
    p: &[f64],
    incumbent: &RisConfig,
    opts: &AoOptions,
    iteration: usize,
) -> Result<Option<RisConfig>> {
    let obj = RisObjective::new(chan, p, cfg.p0_w, cfg.pmax_w);
    let params = GradSearchParams { seed: opts.seed, ..opts.grad.clone() };
    Ok(match opts.method {
        Method::Random | Method::AllOff => None,
        Method::Gradient => Some(search_max_gradient(&obj, &params, Some(incumbent))?.ris),
        Method::Successive => Some(successive_update(&obj, Some(incumbent), opts.max_sweeps, &params)?.ris),
        Method::Sdp => {
            let round_seed = opts.seed ^ ((iteration as u64) << 40);
            match sdp::optimize(chan, p, cfg.p0_w, cfg.pmax_w, opts.n_rounds, round_seed) {
                Ok((_, r)) => Some(r.ris),
                Err(Error::NoFeasibleRounding) => None,
                Err(e) => return Err(e),
            }
        }
    })
}

/// Runs the alternating loop until the relative EE gain of an iteration falls
/// below `rel_ee_tol` or `max_ao_iters` is reached.
pub fn run_ao(cfg: &SystemConfig, chan: &ChannelRealization, opts: &AoOptions) -> Result<AoOutcome> {
    cfg.validate()?;
    opts.validate()?;
    if chan.n() != cfg.n() || chan.m() != cfg.m() || chan.k() != cfg.k {
        return Err(Error::DimensionMismatch(format!(
            "channel is N={} M={} K={} but config says N={} M={} K={}",
            chan.n(),
            chan.m(),
            chan.k(),
            cfg.n(),
            cfg.m(),
            cfg.k
        )));
    }
    let (mut op, mut alloc) = initial_state(cfg, chan, opts)?;
    let mut trace = Vec::new();
    let mut prev_ee: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut report = metrics(cfg, &op.ris, &alloc.p, &op.t);

    for j in 1..=opts.max_ao_iters {
        iterations = j;
        if j > 1 {
            alloc = power_step(cfg, &op).map_err(half_step(j, Stage::Power))?;
        }
        let rep1 = metrics(cfg, &op.ris, &alloc.p, &op.t);
        trace.push(trace_point(j, Stage::Power, &rep1));
        let baseline = *prev_ee.get_or_insert(rep1.ee);

        let proposal = ris_step(cfg, chan, &alloc.p, &op.ris, opts, j).map_err(half_step(j, Stage::Ris))?;
        let mut rep2 = rep1;
        if let Some(q) = proposal.filter(|q| *q != op.ris) {
            if let Ok(cand) = operating(chan, q) {
                let rep = metrics(cfg, &cand.ris, &alloc.p, &cand.t);
                if rep.feasible && rep.ee >= rep2.ee {
                    op = cand;
                    rep2 = rep;
                }
            }
        }
        trace.push(trace_point(j, Stage::Ris, &rep2));
        report = rep2;

        if opts.method.is_fixed() {
            converged = true;
            break;
        }
        let gain = if baseline > 0.0 { (report.ee - baseline) / baseline } else { 0.0 };
        prev_ee = Some(report.ee);
        if gain < opts.rel_ee_tol {
            converged = true;
            break;
        }
    }
    report.trace = trace;
    Ok(AoOutcome { report, ris: op.ris, allocation: alloc, iterations, converged })
}
