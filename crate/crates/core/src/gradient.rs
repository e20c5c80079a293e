//! RIS configuration by maximum-gradient ordered bit flips.
//!
//! With the powers `p` fixed, the RIS step minimizes
//! `g(q) = −½·P0·Σq_n + Σ_k p_k t_k(q)` subject to `Σ_k p_k t_k(q) ≤ Pmax`.
//! `g` differs from `P0·‖θ‖₀ + Σ p_k t_k` by the constant `−N·P0/2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::substream;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, DEFAULT_COND_CAP};
use crate::model::{gram_inverse, ChannelRealization, RisConfig, POWER_TOL};

const STREAM_RESTARTS: u64 = 0x5245;

/// Value of the RIS subproblem at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub tx_power: f64,
    pub feasible: bool,
}

impl Evaluation {
    const SINGULAR: Evaluation = Evaluation { objective: f64::INFINITY, tx_power: f64::INFINITY, feasible: false };
}

/// The RIS subproblem for fixed powers: channel, `p`, `P0`, `Pmax`.
#[derive(Debug, Clone, Copy)]
pub struct RisObjective<'a> {
    pub chan: &'a ChannelRealization,
    pub p: &'a [f64],
    pub p0: f64,
    pub pmax: f64,
}

fn cascade(chan: &ChannelRealization, q: &[f64]) -> CMat {
    let (n, m, k) = (chan.n(), chan.m(), chan.k());
    let mut hh = CMat::zeros(k, m);
    for kk in 0..k {
        for mm in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for nn in 0..n {
                acc += chan.f[(nn, kk)].conj() * chan.g[(nn, mm)] * q[nn];
            }
            hh[(kk, mm)] = acc;
        }
    }
    hh
}

impl<'a> RisObjective<'a> {
    pub fn new(chan: &'a ChannelRealization, p: &'a [f64], p0: f64, pmax: f64) -> Self {
        Self { chan, p, p0, pmax }
    }

    /// Evaluates `g` and the transmit power at a (possibly relaxed) real `q`.
    pub fn evaluate_real(&self, q: &[f64]) -> Evaluation {
        let hh = cascade(self.chan, q);
        let Ok(inv) = gram_inverse(&hh, DEFAULT_COND_CAP) else {
            return Evaluation::SINGULAR;
        };
        let tx: f64 = self.p.iter().enumerate().map(|(k, pk)| pk * inv[(k, k)].re).sum();
        let objective = -0.5 * self.p0 * q.iter().sum::<f64>() + tx;
        Evaluation { objective, tx_power: tx, feasible: tx <= self.pmax + POWER_TOL }
    }

    pub fn evaluate(&self, ris: &RisConfig) -> Evaluation {
        self.evaluate_real(&ris.as_f64())
    }

    /// Analytic `∂g/∂q_n` at a real `q`.
    pub fn gradient_real(&self, q: &[f64]) -> Result<Vec<f64>> {
        let chan = self.chan;
        let hh = cascade(chan, q);
        let b = gram_inverse(&hh, DEFAULT_COND_CAP)?;
        let h = hh.adjoint(); // M×K
        let gh = &chan.g * h; // N×K
        let u = chan.f.map(|z| z.conj()) * b.transpose(); // (B a_n)_k
        let v = gh * &b; // (b_nᵀ B)_k
        Ok((0..chan.n())
            .map(|n| {
                let s: f64 = self
                    .p
                    .iter()
                    .enumerate()
                    .map(|(k, pk)| pk * (u[(n, k)] * v[(n, k)]).re)
                    .sum();
                -0.5 * self.p0 - 2.0 * s
            })
            .collect())
    }

    pub fn gradient(&self, ris: &RisConfig) -> Result<Vec<f64>> {
        self.gradient_real(&ris.as_f64())
    }
}

/// `g(q)`; `+∞` when `HᴴH(q)` is singular.
pub fn objective_g(chan: &ChannelRealization, p: &[f64], p0: f64, ris: &RisConfig) -> f64 {
    RisObjective::new(chan, p, p0, f64::INFINITY).evaluate(ris).objective
}

pub fn gradient_g(chan: &ChannelRealization, p: &[f64], p0: f64, ris: &RisConfig) -> Result<Vec<f64>> {
    RisObjective::new(chan, p, p0, f64::INFINITY).gradient(ris)
}

/// Parameters of the maximum-gradient search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSearchParams {
    /// Fraction of the elements tried per epoch.
    pub rho: f64,
    /// Stop once an epoch keeps fewer flips than this.
    pub eps: usize,
    pub max_epochs: usize,
    /// Seeded random starting points considered besides all-OFF and all-ON.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GradSearchParams {
    fn default() -> Self {
        Self { rho: 0.2, eps: 1, max_epochs: 50, restarts: 10, seed: 0 }
    }
}

impl GradSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) || self.eps == 0 {
            return Err(Error::InvalidConfig(format!("need 0 < rho <= 1 and eps >= 1, got rho={} eps={}", self.rho, self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub ris: RisConfig,
    pub objective: f64,
    pub tx_power: f64,
    /// `g` after each epoch, starting with the value at the chosen start.
    pub trace: Vec<f64>,
}

/// Best feasible start among `q0`, all-OFF, all-ON and `restarts` seeded draws.
/// Earlier candidates win ties.
pub(crate) fn choose_start(
    obj: &RisObjective<'_>,
    q0: Option<&RisConfig>,
    restarts: usize,
    seed: u64,
) -> Result<(RisConfig, Evaluation)> {
    let n = obj.chan.n();
    let mut candidates: Vec<RisConfig> = q0.into_iter().cloned().collect();
    candidates.push(RisConfig::all_off(n));
    candidates.push(RisConfig::all_on(n));
    for r in 0..restarts {
        let mut rng = substream(seed, STREAM_RESTARTS, r as u64);
        let q = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        candidates.push(RisConfig::new(q)?);
    }
    let mut best: Option<(RisConfig, Evaluation)> = None;
    for cand in candidates {
        let ev = obj.evaluate(&cand);
        if !ev.feasible {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| ev.objective < b.objective) {
            best = Some((cand, ev));
        }
    }
    best.ok_or(Error::NoFeasibleStart)
}

/// Maximum-gradient search. Each epoch sorts the elements by `q_n·∂g/∂q_n`
/// (descending), then tries flipping the first `round(ρN)` in that order,
/// keeping a flip only when it stays feasible and strictly lowers `g`.
pub fn search_max_gradient(
    obj: &RisObjective<'_>,
    params: &GradSearchParams,
    q0: Option<&RisConfig>,
) -> Result<SearchResult> {
    params.validate()?;
    let n = obj.chan.n();
    let (mut q, mut cur) = choose_start(obj, q0, params.restarts, params.seed)?;
    let per_epoch = ((params.rho * n as f64).round() as usize).clamp(1, n);
    let mut trace = vec![cur.objective];
    for _ in 0..params.max_epochs {
        let grad = obj.gradient(&q)?;
        let qv = q.values();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (f64::from(qv[a]) * grad[a], f64::from(qv[b]) * grad[b]);
            sb.total_cmp(&sa)
        });
        let mut kept = 0;
        for &idx in &order[..per_epoch] {
            let cand = q.flipped(idx);
            let ev = obj.evaluate(&cand);
            if ev.feasible && ev.objective < cur.objective {
                q = cand;
                cur = ev;
                kept += 1;
            }
        }
        trace.push(cur.objective);
        if kept < params.eps {
            break;
        }
    }
    Ok(SearchResult { ris: q, objective: cur.objective, tx_power: cur.tx_power, trace })
}
