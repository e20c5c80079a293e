//! Semidefinite relaxation of the RIS subproblem and hypersphere rounding.
//!
//! Lifting `q` to `X = [[qqᵀ, q], [qᵀ, 1]]` turns the RIS subproblem into
//!
//! ```text
//! min  −¼·P0·tr(E0·X) + tr(P·M(X)⁻¹)
//! s.t. tr(P·M(X)⁻¹) ≤ Pmax,  X_ii = 1,  X ⪰ 0,  rank X = 1
//! ```
//!
//! with `M(X) = F0ᴴ (X ⊙ G0) F0`. Dropping the rank constraint gives a convex
//! problem. The trace-of-inverse term is written as `tr(Y)` with
//! `[[M, P^½], [P^½, Y]] ⪰ 0`, and that Hermitian block is carried in its real
//! `[[Re, −Im], [Im, Re]]` embedding so [`ipm`] can solve it.

pub mod ipm;

use nalgebra::SymmetricEigen;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::channel::substream;
use crate::error::{Error, Result};
use crate::gradient::{Evaluation, RisObjective};
use crate::linalg::{hermitian_pd_inverse, CMat, RMat, DEFAULT_COND_CAP};
use crate::model::{ChannelRealization, RisConfig, POWER_TOL};

use ipm::{Block, Coeff, Constraint, Problem, Settings};

const STREAM_ROUNDING: u64 = 0x5344;

/// Eigenvalues of `X̃` in `[−CLIP_TOL, 0)` are treated as zero during rounding.
pub const CLIP_TOL: f64 = 1e-7;
pub const DEFAULT_ROUNDS: usize = 100;

/// Data of the lifted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub n: usize,
    pub k: usize,
    /// `(N+1)×(N+1)`, ones on the off-diagonal part of the last row and column.
    pub e0: RMat,
    /// `[F; 0]`, `(N+1)×K`.
    pub f0: CMat,
    /// `[[GGᴴ, 0], [0, 0]]`, `(N+1)×(N+1)`.
    pub g0: CMat,
    pub p: Vec<f64>,
    pub p0: f64,
    pub pmax: f64,
}

impl SdpProblem {
    /// Selector of diagonal entry `i`.
    pub fn e_ii(&self, i: usize) -> RMat {
        let mut e = RMat::zeros(self.n + 1, self.n + 1);
        e[(i, i)] = 1.0;
        e
    }

    /// Lifted point `[[qqᵀ, q], [qᵀ, 1]]`.
    pub fn x_of(ris: &RisConfig) -> RMat {
        let mut v = ris.as_f64();
        v.push(1.0);
        let v = nalgebra::DVector::from_vec(v);
        &v * v.transpose()
    }

    /// `M(X) = F0ᴴ (X ⊙ G0) F0`.
    pub fn gram(&self, x: &RMat) -> CMat {
        let had = self.g0.zip_map(x, |g, xv| g * xv);
        self.f0.adjoint() * had * &self.f0
    }

    /// `tr(P·M(X)⁻¹)`; `+∞` when `M(X)` is singular.
    pub fn tx_power(&self, x: &RMat) -> f64 {
        let Ok(inv) = hermitian_pd_inverse(&self.gram(x), DEFAULT_COND_CAP) else {
            return f64::INFINITY;
        };
        self.p.iter().enumerate().map(|(k, pk)| pk * inv[(k, k)].re).sum()
    }

    /// Relaxed objective; equals `g(q)` at `X = x_of(q)`.
    pub fn objective(&self, x: &RMat) -> f64 {
        -0.25 * self.p0 * self.e0.dot(x) + self.tx_power(x)
    }
}

/// Builds the lifted matrices for channel `chan`, powers `p`, per-element ON
/// power `p0` and budget `pmax`.
pub fn assemble(chan: &ChannelRealization, p: &[f64], p0: f64, pmax: f64) -> Result<SdpProblem> {
    let (n, k) = (chan.n(), chan.k());
    if p.len() != k {
        return Err(Error::DimensionMismatch(format!("{} powers for {k} users", p.len())));
    }
    let mut e0 = RMat::zeros(n + 1, n + 1);
    for i in 0..n {
        e0[(i, n)] = 1.0;
        e0[(n, i)] = 1.0;
    }
    let mut f0 = CMat::zeros(n + 1, k);
    f0.view_mut((0, 0), (n, k)).copy_from(&chan.f);
    let mut g0 = CMat::zeros(n + 1, n + 1);
    g0.view_mut((0, 0), (n, n)).copy_from(&(&chan.g * chan.g.adjoint()));
    Ok(SdpProblem { n, k, e0, f0, g0, p: p.to_vec(), p0, pmax })
}

/// Optimum of the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Relaxed `(N+1)×(N+1)` lifted variable.
    pub x_tilde: RMat,
    /// Relaxed objective at `x_tilde`, in watts, comparable with `g`.
    pub objective_value: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Scaled solver objectives, kept for diagnostics.
    pub primal_objective: f64,
    pub dual_objective: f64,
}

/// Positions of `Re S_uv` inside the `[[Re S, −Im S], [Im S, Re S]]` embedding.
fn re_entries(dim: usize, u: usize, v: usize) -> Vec<(usize, usize, f64)> {
    if u == v {
        vec![(u, u, 0.5), (dim + u, dim + u, 0.5)]
    } else {
        vec![(u, v, 0.25), (v, u, 0.25), (dim + u, dim + v, 0.25), (dim + v, dim + u, 0.25)]
    }
}

fn im_entries(dim: usize, u: usize, v: usize) -> Vec<(usize, usize, f64)> {
    vec![(dim + u, v, 0.25), (v, dim + u, 0.25), (u, dim + v, -0.25), (dim + v, u, -0.25)]
}

fn negated(e: Vec<(usize, usize, f64)>) -> Coeff {
    Coeff::Sparse(e.into_iter().map(|(r, c, v)| (r, c, -v)).collect())
}

/// Scaled conic form: blocks are `X` (PSD, N+1), the embedded Schur block
/// (PSD, 4K) and, for a finite budget, the power-budget slack (LP, 1).
struct Scaled {
    problem: Problem,
    /// Multiplier turning the scaled objective back into watts.
    omega: f64,
}

fn conic_form(prob: &SdpProblem) -> Scaled {
    let (n, k) = (prob.n, prob.k);
    let dim = 2 * k;
    let mu_m = {
        let tr = prob.gram(&RMat::identity(n + 1, n + 1)).trace().re;
        if tr > 0.0 { tr / k as f64 } else { 1.0 }
    };
    let mean_p = prob.p.iter().sum::<f64>() / k as f64;
    let nu_p = if mean_p > 0.0 { mean_p } else { 1.0 };
    let beta = nu_p / mu_m;
    let omega = beta.max(prob.p0 / 4.0);

    let mut constraints = Vec::new();
    for i in 0..=n {
        constraints.push(Constraint { parts: vec![(0, Coeff::Sparse(vec![(i, i, 1.0)]))], rhs: 1.0 });
    }
    // M'(X) = S11, one real and one imaginary equation per upper entry.
    let ggh = prob.g0.view((0, 0), (n, n));
    for kk in 0..k {
        for ll in kk..k {
            let mut re = RMat::zeros(n + 1, n + 1);
            let mut im = RMat::zeros(n + 1, n + 1);
            for i in 0..n {
                for j in 0..n {
                    let c = prob.f0[(i, kk)].conj() * ggh[(i, j)] * prob.f0[(j, ll)] / mu_m;
                    re[(i, j)] += 0.5 * c.re;
                    re[(j, i)] += 0.5 * c.re;
                    im[(i, j)] += 0.5 * c.im;
                    im[(j, i)] += 0.5 * c.im;
                }
            }
            constraints.push(Constraint {
                parts: vec![(0, Coeff::Dense(re)), (1, negated(re_entries(dim, kk, ll)))],
                rhs: 0.0,
            });
            if kk < ll {
                constraints.push(Constraint {
                    parts: vec![(0, Coeff::Dense(im)), (1, negated(im_entries(dim, kk, ll)))],
                    rhs: 0.0,
                });
            }
        }
    }
    // S12 = P'^½.
    for kk in 0..k {
        for ll in 0..k {
            let rhs = if kk == ll { (prob.p[kk] / nu_p).sqrt() } else { 0.0 };
            constraints.push(Constraint { parts: vec![(1, Coeff::Sparse(re_entries(dim, kk, k + ll)))], rhs });
            constraints.push(Constraint { parts: vec![(1, Coeff::Sparse(im_entries(dim, kk, k + ll)))], rhs: 0.0 });
        }
    }
    // tr(Y') + s = Pmax/β.
    let trace_y: Vec<(usize, usize, f64)> = (0..k).flat_map(|kk| re_entries(dim, k + kk, k + kk)).collect();
    let mut blocks = vec![Block::Psd(n + 1), Block::Psd(4 * k)];
    if prob.pmax.is_finite() {
        blocks.push(Block::Lp(1));
        constraints.push(Constraint {
            parts: vec![(1, Coeff::Sparse(trace_y.clone())), (2, Coeff::Sparse(vec![(0, 0, 1.0)]))],
            rhs: prob.pmax / beta,
        });
    }

    let e0_entries: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| [(i, n, -prob.p0 / (4.0 * omega)), (n, i, -prob.p0 / (4.0 * omega))])
        .collect();
    let y_weight = beta / omega;
    let objective = vec![
        (0, Coeff::Sparse(e0_entries)),
        (1, Coeff::Sparse(trace_y.into_iter().map(|(r, c, v)| (r, c, v * y_weight)).collect())),
    ];
    Scaled {
        problem: Problem { blocks, objective, constraints },
        omega,
    }
}

/// Whether some point `(1−s)·I + s·11ᵀ` satisfies the power constraint.
fn has_interior_candidate(prob: &SdpProblem) -> bool {
    let dim = prob.n + 1;
    (0..=10).any(|step| {
        let s = step as f64 / 10.0;
        let x = RMat::identity(dim, dim) * (1.0 - s) + RMat::from_element(dim, dim, s);
        prob.tx_power(&x) <= prob.pmax + POWER_TOL
    })
}

pub fn solve_relaxation(prob: &SdpProblem) -> Result<SdpSolution> {
    solve_relaxation_with(prob, &Settings::default())
}

pub fn solve_relaxation_with(prob: &SdpProblem, settings: &Settings) -> Result<SdpSolution> {
    let plausible = has_interior_candidate(prob);
    let scaled = conic_form(prob);
    let sol = match ipm::solve(&scaled.problem, settings) {
        Ok(s) => s,
        Err(_) if !plausible => return Err(Error::RelaxationInfeasible),
        Err(e) => return Err(e),
    };
    let ipm::Value::Psd(x) = &sol.x[0] else { unreachable!("block 0 is PSD") };
    let mut x_tilde = x.clone();
    for i in 0..x_tilde.nrows() {
        for j in (i + 1)..x_tilde.ncols() {
            let v = 0.5 * (x_tilde[(i, j)] + x_tilde[(j, i)]);
            x_tilde[(i, j)] = v;
            x_tilde[(j, i)] = v;
        }
    }
    let objective_value = prob.objective(&x_tilde);
    if !objective_value.is_finite() {
        return Err(Error::SolverFailure("relaxed Gram matrix is singular at the returned point".into()));
    }
    Ok(SdpSolution {
        x_tilde,
        objective_value,
        gap: sol.rel_gap,
        iterations: sol.iterations,
        primal_objective: scaled.omega * sol.primal_objective,
        dual_objective: scaled.omega * sol.dual_objective,
    })
}

/// Best rounded configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Rounding {
    pub ris: RisConfig,
    pub evaluation: Evaluation,
    /// Candidates (both signs counted) that met the power budget.
    pub feasible_candidates: usize,
}

/// Gaussian hypersphere rounding of the top-left `N×N` block of `X̃`.
///
/// Each draw `u` gives `q̂ = sign(Vᵀu)` with `VᵀV = X̃₁₁`; `q̂` and `−q̂` are both
/// scored and the feasible candidate with the lowest `g` wins, ties going to
/// the lexicographically smaller vector.
pub fn round_solution(
    sol: &SdpSolution,
    prob: &SdpProblem,
    chan: &ChannelRealization,
    n_rounds: usize,
    seed: u64,
) -> Result<Rounding> {
    let n = prob.n;
    let block = sol.x_tilde.view((0, 0), (n, n)).clone_owned();
    let eig = SymmetricEigen::new(block);
    let mut roots = Vec::with_capacity(n);
    for &lam in eig.eigenvalues.iter() {
        if lam < -CLIP_TOL {
            return Err(Error::SolverFailure(format!("relaxed solution has eigenvalue {lam:.3e}")));
        }
        roots.push(lam.max(0.0).sqrt());
    }
    let obj = RisObjective::new(chan, &prob.p, prob.p0, prob.pmax);
    let mut best: Option<(RisConfig, Evaluation)> = None;
    let mut feasible_candidates = 0;
    for draw in 0..n_rounds {
        let mut rng = substream(seed, STREAM_ROUNDING, draw as u64);
        let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        // (Vᵀu)_i = Σ_j √λ_j Q_ij u_j
        let q: Vec<i8> = (0..n)
            .map(|i| {
                let proj: f64 = (0..n).map(|j| roots[j] * eig.eigenvectors[(i, j)] * u[j]).sum();
                if proj >= 0.0 { 1 } else { -1 }
            })
            .collect();
        let cand = RisConfig::new(q)?;
        for c in [cand.negated(), cand] {
            let ev = obj.evaluate(&c);
            if !ev.feasible {
                continue;
            }
            feasible_candidates += 1;
            let better = match &best {
                None => true,
                Some((bq, be)) => ev.objective < be.objective || (ev.objective == be.objective && c < *bq),
            };
            if better {
                best = Some((c, ev));
            }
        }
    }
    let (ris, evaluation) = best.ok_or(Error::NoFeasibleRounding)?;
    Ok(Rounding { ris, evaluation, feasible_candidates })
}

/// Relaxation followed by rounding.
pub fn optimize(
    chan: &ChannelRealization,
    p: &[f64],
    p0: f64,
    pmax: f64,
    n_rounds: usize,
    seed: u64,
) -> Result<(SdpSolution, Rounding)> {
    let prob = assemble(chan, p, p0, pmax)?;
    let sol = solve_relaxation(&prob)?;
    let rounding = round_solution(&sol, &prob, chan, n_rounds, seed)?;
    Ok((sol, rounding))
}
