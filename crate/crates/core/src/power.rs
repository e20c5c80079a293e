//! Optimal per-user powers for a fixed RIS state.
//!
//! Maximizes `Σ log₂(1 + p_k/σ²) / (P₁ + Σ p_k t_k / ν)` subject to
//! `Σ p_k t_k ≤ Pmax` and `p_k ≥ p_min` by Dinkelbach iteration. Each inner
//! problem has the water-filling solution
//!
//! ```text
//! ζ : Σ_k max{ζ − t_k σ², t_k p_min} = Pmax
//! ξ = min{ζ, ν / (λ ln 2)}
//! p_k = max{(ξ − t_k σ²) / t_k, p_min}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{spectral_efficiency, transmit_power, PowerAllocation, SystemConfig};

/// Stop when `λ` improves by less than this (bits/s/Hz per watt).
pub const LAMBDA_TOL: f64 = 1e-9;
pub const MAX_DINKELBACH_ITERS: usize = 50;

/// One instance of the power allocation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocProblem {
    pub t: Vec<f64>,
    pub sigma2: f64,
    pub p_min: f64,
    pub pmax: f64,
    /// Constant part of the power consumption, `P_static + P0·on_count`.
    pub p_const: f64,
    /// Amplifier efficiency dividing the transmit power in the denominator.
    pub nu: f64,
}

impl AllocProblem {
    pub fn new(t: Vec<f64>, sigma2: f64, p_min: f64, pmax: f64, p_const: f64) -> Result<Self> {
        Self::with_efficiency(t, sigma2, p_min, pmax, p_const, 1.0)
    }

    pub fn with_efficiency(t: Vec<f64>, sigma2: f64, p_min: f64, pmax: f64, p_const: f64, nu: f64) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidConfig("power allocation needs at least one user".into()));
        }
        if t.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("t_k must be positive and finite".into()));
        }
        if !(sigma2 > 0.0) || !(p_min >= 0.0) || !(pmax > 0.0) || !(p_const >= 0.0) || !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bad allocation constants: sigma2={sigma2}, p_min={p_min}, pmax={pmax}, p_const={p_const}, nu={nu}"
            )));
        }
        Ok(Self { t, sigma2, p_min, pmax, p_const, nu })
    }

    /// Builds the problem for the current RIS ON-count.
    pub fn from_config(cfg: &SystemConfig, t: Vec<f64>, on_count: usize) -> Result<Self> {
        Self::with_efficiency(
            t,
            cfg.noise_power(),
            cfg.p_min(),
            cfg.pmax_w,
            cfg.p_static_w + cfg.p0_w * on_count as f64,
            cfg.nu,
        )
    }

    pub fn k(&self) -> usize {
        self.t.len()
    }

    /// Transmit power needed to serve every user at `p_min`.
    pub fn min_budget(&self) -> f64 {
        self.t.iter().map(|t| t * self.p_min).sum()
    }

    /// `(Σ log₂(1 + p_k/σ²), P₁ + Σ p_k t_k / ν)`
    pub fn ratio_parts(&self, p: &[f64]) -> (f64, f64) {
        (spectral_efficiency(p, self.sigma2), self.p_const + transmit_power(p, &self.t) / self.nu)
    }

    pub fn ratio(&self, p: &[f64]) -> f64 {
        let (num, den) = self.ratio_parts(p);
        num / den
    }

    /// Dinkelbach inner objective `num − λ·den`.
    pub fn parametric_objective(&self, p: &[f64], lambda: f64) -> f64 {
        let (num, den) = self.ratio_parts(p);
        num - lambda * den
    }
}

/// Iterate of the Dinkelbach loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachState {
    pub lambda: f64,
    pub p: Vec<f64>,
    pub iteration: usize,
}

/// Root of `s(ζ) = Σ_k max{ζ − t_kσ², t_k p_min} − Pmax`, solved exactly on
/// the active linear segment after sorting the breakpoints
/// `ζ_k = t_k (σ² + p_min)`.
pub fn solve_zeta(prob: &AllocProblem) -> Result<f64> {
    let floor = prob.min_budget();
    if floor > prob.pmax {
        return Err(Error::Infeasible { required: floor, budget: prob.pmax });
    }
    let mut users: Vec<(f64, f64)> = prob
        .t
        .iter()
        .map(|&t| (t * (prob.sigma2 + prob.p_min), t))
        .collect();
    users.sort_by(|a, b| a.0.total_cmp(&b.0));
    if floor == prob.pmax {
        // s is flat (zero) up to the first breakpoint.
        return Ok(users[0].0);
    }
    // Segment j has users[..=j] active.
    let mut inactive_floor = floor;
    let mut active_noise = 0.0;
    for (j, &(brk, t)) in users.iter().enumerate() {
        inactive_floor -= t * prob.p_min;
        active_noise += t * prob.sigma2;
        let zeta = (prob.pmax - inactive_floor + active_noise) / (j + 1) as f64;
        let next = users.get(j + 1).map_or(f64::INFINITY, |u| u.0);
        if zeta <= next {
            return Ok(zeta.max(brk));
        }
    }
    unreachable!("last segment has an unbounded right end")
}

/// Maximizer of `Σ log₂(1 + p_k/σ²) − λ(P₁ + Σ p_k t_k/ν)` over the feasible set.
pub fn inner_solution(prob: &AllocProblem, lambda: f64) -> Result<Vec<f64>> {
    let zeta = solve_zeta(prob)?;
    let xi = if lambda > 0.0 {
        zeta.min(prob.nu / (lambda * std::f64::consts::LN_2))
    } else {
        zeta
    };
    Ok(prob
        .t
        .iter()
        .map(|&t| ((xi - t * prob.sigma2) / t).max(prob.p_min))
        .collect())
}

/// Dinkelbach iteration from `λ⁰ = 0` until the ratio improves by less than
/// [`LAMBDA_TOL`] or [`MAX_DINKELBACH_ITERS`] inner solves.
pub fn dinkelbach(prob: &AllocProblem) -> Result<PowerAllocation> {
    let mut state = DinkelbachState { lambda: 0.0, p: Vec::new(), iteration: 0 };
    let mut trace = vec![0.0];
    while state.iteration < MAX_DINKELBACH_ITERS {
        state.iteration += 1;
        state.p = inner_solution(prob, state.lambda)?;
        let next = prob.ratio(&state.p);
        trace.push(next);
        let gain = next - state.lambda;
        state.lambda = next;
        if gain < LAMBDA_TOL {
            break;
        }
    }
    Ok(PowerAllocation { p: state.p, lambda_trace: trace, iterations: state.iteration })
}
