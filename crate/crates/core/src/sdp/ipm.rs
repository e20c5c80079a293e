//! Infeasible-start primal-dual interior-point method for block-diagonal
//! semidefinite programs in standard form
//!
//! ```text
//! min ⟨C, X⟩   s.t.  ⟨A_i, X⟩ = b_i,   X ⪰ 0
//! max bᵀy      s.t.  Σ y_i A_i + Z = C, Z ⪰ 0
//! ```
//!
//! `X` is a direct sum of real symmetric PSD blocks and nonnegative orthant
//! blocks. Search directions are HKM with a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::RMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Psd(usize),
    /// Nonnegative orthant of the given dimension.
    Lp(usize),
}

impl Block {
    fn dim(self) -> usize {
        match self {
            Block::Psd(n) | Block::Lp(n) => n,
        }
    }
}

/// Coefficient matrix restricted to one block.
///
/// Sparse entries list every stored position explicitly, so a symmetric
/// off-diagonal coefficient appears twice. For `Lp` blocks use `(l, l, v)`.
#[derive(Debug, Clone)]
pub enum Coeff {
    Sparse(Vec<(usize, usize, f64)>),
    Dense(RMat),
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub parts: Vec<(usize, Coeff)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub blocks: Vec<Block>,
    pub objective: Vec<(usize, Coeff)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub tol: f64,
    /// Looser tolerance accepted when `max_iter` is reached.
    pub accept_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { tol: 1e-9, accept_tol: 1e-7, max_iter: 100, step_fraction: 0.98 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Psd(RMat),
    Lp(DVector<f64>),
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<Value>,
    pub y: Vec<f64>,
    pub z: Vec<Value>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub rel_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

fn coeff_dot(coeff: &Coeff, val: &Value) -> f64 {
    match (coeff, val) {
        (Coeff::Sparse(e), Value::Psd(x)) => e.iter().map(|&(r, c, v)| v * x[(r, c)]).sum(),
        (Coeff::Sparse(e), Value::Lp(x)) => e.iter().map(|&(r, _, v)| v * x[r]).sum(),
        (Coeff::Dense(a), Value::Psd(x)) => a.dot(x),
        (Coeff::Dense(a), Value::Lp(x)) => (0..x.len()).map(|l| a[(l, l)] * x[l]).sum(),
    }
}

/// `⟨A, T⟩` for a general (possibly nonsymmetric) dense `T`.
fn coeff_dot_mat(coeff: &Coeff, t: &RMat) -> f64 {
    match coeff {
        Coeff::Sparse(e) => e.iter().map(|&(r, c, v)| v * t[(r, c)]).sum(),
        Coeff::Dense(a) => a.dot(t),
    }
}

fn add_scaled(target: &mut Value, coeff: &Coeff, s: f64) {
    match (target, coeff) {
        (Value::Psd(x), Coeff::Sparse(e)) => e.iter().for_each(|&(r, c, v)| x[(r, c)] += s * v),
        (Value::Psd(x), Coeff::Dense(a)) => *x += a * s,
        (Value::Lp(x), Coeff::Sparse(e)) => e.iter().for_each(|&(r, _, v)| x[r] += s * v),
        (Value::Lp(x), Coeff::Dense(a)) => (0..x.len()).for_each(|l| x[l] += s * a[(l, l)]),
    }
}

fn value_dot(a: &Value, b: &Value) -> f64 {
    match (a, b) {
        (Value::Psd(x), Value::Psd(y)) => x.dot(y),
        (Value::Lp(x), Value::Lp(y)) => x.dot(y),
        _ => unreachable!("block kinds always line up"),
    }
}

fn value_norm_sq(a: &Value) -> f64 {
    value_dot(a, a)
}

fn zeros_like(blocks: &[Block]) -> Vec<Value> {
    blocks
        .iter()
        .map(|b| match *b {
            Block::Psd(n) => Value::Psd(RMat::zeros(n, n)),
            Block::Lp(n) => Value::Lp(DVector::zeros(n)),
        })
        .collect()
}

fn symmetrize(m: &mut RMat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `α` with `X + α·dX ⪰ 0` (∞ when unbounded).
fn max_step_psd(x: &RMat, dx: &RMat) -> Result<f64> {
    let chol = Cholesky::new(x.clone()).ok_or_else(|| Error::SolverFailure("iterate lost definiteness".into()))?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(dx)
        .ok_or_else(|| Error::SolverFailure("triangular solve failed".into()))?;
    let mut m = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::SolverFailure("triangular solve failed".into()))?;
    symmetrize(&mut m);
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    Ok(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn max_step(x: &[Value], dx: &[Value]) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for (a, b) in x.iter().zip(dx) {
        let s = match (a, b) {
            (Value::Psd(x), Value::Psd(d)) => max_step_psd(x, d)?,
            (Value::Lp(x), Value::Lp(d)) => max_step_lp(x, d),
            _ => unreachable!(),
        };
        alpha = alpha.min(s);
    }
    Ok(alpha)
}

struct Direction {
    dx: Vec<Value>,
    dy: DVector<f64>,
    dz: Vec<Value>,
}

struct Solver<'a> {
    prob: &'a Problem,
    /// Constraints touching each block: (constraint index, coefficient).
    by_block: Vec<Vec<(usize, &'a Coeff)>>,
    b: DVector<f64>,
    c: Vec<Value>,
}

enum Inverse {
    Psd(RMat),
    Lp(DVector<f64>),
}

impl<'a> Solver<'a> {
    fn new(prob: &'a Problem) -> Result<Self> {
        let nb = prob.blocks.len();
        let mut by_block: Vec<Vec<(usize, &Coeff)>> = vec![Vec::new(); nb];
        for (i, con) in prob.constraints.iter().enumerate() {
            for (blk, coeff) in &con.parts {
                if *blk >= nb {
                    return Err(Error::SolverFailure(format!("constraint {i} references block {blk}")));
                }
                by_block[*blk].push((i, coeff));
            }
        }
        let mut c = zeros_like(&prob.blocks);
        for (blk, coeff) in &prob.objective {
            add_scaled(&mut c[*blk], coeff, 1.0);
        }
        let b = DVector::from_iterator(prob.constraints.len(), prob.constraints.iter().map(|c| c.rhs));
        Ok(Self { prob, by_block, b, c })
    }

    fn apply_a(&self, x: &[Value]) -> DVector<f64> {
        DVector::from_iterator(
            self.prob.constraints.len(),
            self.prob
                .constraints
                .iter()
                .map(|con| con.parts.iter().map(|(blk, coeff)| coeff_dot(coeff, &x[*blk])).sum()),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<Value> {
        let mut out = zeros_like(&self.prob.blocks);
        for (i, con) in self.prob.constraints.iter().enumerate() {
            for (blk, coeff) in &con.parts {
                add_scaled(&mut out[*blk], coeff, y[i]);
            }
        }
        out
    }

    /// `H_ij = Σ_blocks ⟨A_i, X A_j Z⁻¹⟩`.
    fn schur(&self, x: &[Value], zinv: &[Inverse]) -> DMatrix<f64> {
        let m = self.prob.constraints.len();
        let mut h = DMatrix::<f64>::zeros(m, m);
        for (blk, cons) in self.by_block.iter().enumerate() {
            match (&x[blk], &zinv[blk]) {
                (Value::Psd(xb), Inverse::Psd(zi)) => {
                    let dense: Vec<(usize, RMat)> = cons
                        .iter()
                        .filter_map(|&(j, c)| match c {
                            Coeff::Dense(a) => Some((j, xb * a * zi)),
                            Coeff::Sparse(_) => None,
                        })
                        .collect();
                    for &(i, ci) in cons {
                        // Pair with every dense constraint through its precomputed product; a
                        // sparse row also fills the mirrored dense row.
                        for (j, gj) in &dense {
                            let v = coeff_dot_mat(ci, gj);
                            h[(i, *j)] += v;
                            if matches!(ci, Coeff::Sparse(_)) {
                                h[(*j, i)] += v;
                            }
                        }
                        let Coeff::Sparse(ei) = ci else { continue };
                        for &(j, cj) in cons {
                            let Coeff::Sparse(ej) = cj else { continue };
                            let mut acc = 0.0;
                            for &(a, bb, w) in ei {
                                for &(r, cc, v) in ej {
                                    acc += w * v * xb[(a, r)] * zi[(cc, bb)];
                                }
                            }
                            h[(i, j)] += acc;
                        }
                    }
                }
                (Value::Lp(xb), Inverse::Lp(zi)) => {
                    for &(i, ci) in cons {
                        for &(j, cj) in cons {
                            let (Coeff::Sparse(ei), Coeff::Sparse(ej)) = (ci, cj) else {
                                unreachable!("LP coefficients are stored sparse")
                            };
                            let mut acc = 0.0;
                            for &(l, _, w) in ei {
                                for &(l2, _, v) in ej {
                                    if l == l2 {
                                        acc += w * v * xb[l] * zi[l];
                                    }
                                }
                            }
                            h[(i, j)] += acc;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        // Symmetrize away round-off.
        let ht = h.transpose();
        (h + ht) * 0.5
    }

    /// Solves the Newton system for a complementarity target `Rc`
    /// (`σμI − XZ − correction` per block).
    fn direction(
        &self,
        x: &[Value],
        zinv: &[Inverse],
        chol: &Cholesky<f64, nalgebra::Dyn>,
        rp: &DVector<f64>,
        rd: &[Value],
        rc: &[Value],
    ) -> Direction {
        // T = (X·Rd − Rc)·Z⁻¹ per block.
        let t: Vec<Value> = x
            .iter()
            .zip(rd)
            .zip(rc)
            .zip(zinv)
            .map(|(((xb, rdb), rcb), zi)| match (xb, rdb, rcb, zi) {
                (Value::Psd(xb), Value::Psd(rdb), Value::Psd(rcb), Inverse::Psd(zi)) => Value::Psd((xb * rdb - rcb) * zi),
                (Value::Lp(xb), Value::Lp(rdb), Value::Lp(rcb), Inverse::Lp(zi)) => {
                    Value::Lp((xb.component_mul(rdb) - rcb).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        let mut rhs = rp.clone();
        for (i, con) in self.prob.constraints.iter().enumerate() {
            for (blk, coeff) in &con.parts {
                rhs[i] += match &t[*blk] {
                    Value::Psd(tm) => coeff_dot_mat(coeff, tm),
                    v @ Value::Lp(_) => coeff_dot(coeff, v),
                };
            }
        }
        let dy = chol.solve(&rhs);
        let aty = self.apply_at(&dy);
        let dz: Vec<Value> = rd
            .iter()
            .zip(&aty)
            .map(|(r, a)| match (r, a) {
                (Value::Psd(r), Value::Psd(a)) => Value::Psd(r - a),
                (Value::Lp(r), Value::Lp(a)) => Value::Lp(r - a),
                _ => unreachable!(),
            })
            .collect();
        let dx: Vec<Value> = x
            .iter()
            .zip(&dz)
            .zip(rc)
            .zip(zinv)
            .map(|(((xb, dzb), rcb), zi)| match (xb, dzb, rcb, zi) {
                (Value::Psd(xb), Value::Psd(dzb), Value::Psd(rcb), Inverse::Psd(zi)) => {
                    let mut d = (rcb - xb * dzb) * zi;
                    symmetrize(&mut d);
                    Value::Psd(d)
                }
                (Value::Lp(xb), Value::Lp(dzb), Value::Lp(rcb), Inverse::Lp(zi)) => {
                    Value::Lp((rcb - xb.component_mul(dzb)).component_mul(zi))
                }
                _ => unreachable!(),
            })
            .collect();
        Direction { dx, dy, dz }
    }
}

fn coeff_norm(c: &Coeff) -> f64 {
    match c {
        Coeff::Sparse(e) => e.iter().map(|&(_, _, v)| v * v).sum::<f64>().sqrt(),
        Coeff::Dense(a) => a.norm(),
    }
}

fn factor_schur(h: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(h.clone()) {
        return Ok(c);
    }
    let scale = h.diagonal().amax().max(1e-300);
    for reg in [1e-14, 1e-12, 1e-10] {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg * scale;
        }
        if let Some(c) = Cholesky::new(hr) {
            return Ok(c);
        }
    }
    Err(Error::SolverFailure("Schur complement matrix is not positive definite".into()))
}

fn axpy_values(x: &mut [Value], alpha: f64, d: &[Value]) {
    for (a, b) in x.iter_mut().zip(d) {
        match (a, b) {
            (Value::Psd(a), Value::Psd(b)) => *a += b * alpha,
            (Value::Lp(a), Value::Lp(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!(),
        }
    }
}

/// Solves the SDP; fails with [`Error::SolverFailure`] if the tolerance is
/// not met within the iteration budget.
pub fn solve(prob: &Problem, settings: &Settings) -> Result<Solution> {
    let solver = Solver::new(prob)?;
    let m = prob.constraints.len();
    let nu: f64 = prob.blocks.iter().map(|b| b.dim() as f64).sum();
    let b_norm = solver.b.norm();
    let c_norm = solver.c.iter().map(value_norm_sq).sum::<f64>().sqrt();

    // Standard infeasible starting point X = ξI, Z = ηI.
    let mut x = Vec::with_capacity(prob.blocks.len());
    let mut z = Vec::with_capacity(prob.blocks.len());
    for (blk, block) in prob.blocks.iter().enumerate() {
        let n = block.dim() as f64;
        let mut xi = 10f64.max(n.sqrt());
        let mut eta = 10f64.max(n.sqrt());
        for &(i, coeff) in &solver.by_block[blk] {
            let an = coeff_norm(coeff);
            xi = xi.max(n * (1.0 + solver.b[i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        if let Some((_, cc)) = prob.objective.iter().find(|(bk, _)| *bk == blk) {
            eta = eta.max(coeff_norm(cc));
        }
        match *block {
            Block::Psd(n) => {
                x.push(Value::Psd(RMat::identity(n, n) * xi));
                z.push(Value::Psd(RMat::identity(n, n) * eta));
            }
            Block::Lp(n) => {
                x.push(Value::Lp(DVector::from_element(n, xi)));
                z.push(Value::Lp(DVector::from_element(n, eta)));
            }
        }
    }
    let mut y = DVector::<f64>::zeros(m);

    let mut iterations = 0;
    loop {
        let ax = solver.apply_a(&x);
        let rp = &solver.b - &ax;
        let aty = solver.apply_at(&y);
        let rd: Vec<Value> = solver
            .c
            .iter()
            .zip(&aty)
            .zip(&z)
            .map(|((c, a), zb)| match (c, a, zb) {
                (Value::Psd(c), Value::Psd(a), Value::Psd(zb)) => Value::Psd(c - a - zb),
                (Value::Lp(c), Value::Lp(a), Value::Lp(zb)) => Value::Lp(c - a - zb),
                _ => unreachable!(),
            })
            .collect();
        let pobj: f64 = solver.c.iter().zip(&x).map(|(c, xb)| value_dot(c, xb)).sum();
        let dobj = solver.b.dot(&y);
        let xz: f64 = x.iter().zip(&z).map(|(a, b)| value_dot(a, b)).sum();
        let mu = xz / nu;
        let relp = rp.norm() / (1.0 + b_norm);
        let reld = rd.iter().map(value_norm_sq).sum::<f64>().sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
        let done = relp <= settings.tol && reld <= settings.tol && gap <= settings.tol;
        let acceptable = relp <= settings.accept_tol && reld <= settings.accept_tol && gap <= settings.accept_tol;
        let finish = move |x: Vec<Value>, y: DVector<f64>, z: Vec<Value>| Solution {
            x,
            y: y.iter().copied().collect(),
            z,
            primal_objective: pobj,
            dual_objective: dobj,
            rel_gap: gap,
            primal_infeasibility: relp,
            dual_infeasibility: reld,
            iterations,
        };
        if done || iterations >= settings.max_iter {
            if !done && !acceptable {
                return Err(Error::SolverFailure(format!(
                    "no convergence after {iterations} iterations (primal {relp:.2e}, dual {reld:.2e}, gap {gap:.2e})"
                )));
            }
            return Ok(finish(x, y, z));
        }
        iterations += 1;
        // Near the optimum round-off can break the factorizations; an
        // iterate already within the looser tolerance is kept in that case.
        match newton_step(&solver, settings, &mut x, &mut y, &mut z, mu, &rp, &rd) {
            Ok(()) => {}
            Err(_) if acceptable => return Ok(finish(x, y, z)),
            Err(e) => return Err(e),
        }
    }
}

/// One predictor-corrector step. Leaves the iterate untouched on error.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    solver: &Solver<'_>,
    settings: &Settings,
    x: &mut [Value],
    y: &mut DVector<f64>,
    z: &mut [Value],
    mu: f64,
    rp: &DVector<f64>,
    rd: &[Value],
) -> Result<()> {
    let xz: f64 = x.iter().zip(z.iter()).map(|(a, b)| value_dot(a, b)).sum();
    let zinv: Vec<Inverse> = z
        .iter()
        .map(|zb| match zb {
            Value::Psd(zm) => {
                let mut inv = Cholesky::new(zm.clone())
                    .ok_or_else(|| Error::SolverFailure("dual slack lost definiteness".into()))?
                    .inverse();
                symmetrize(&mut inv);
                Ok(Inverse::Psd(inv))
            }
            Value::Lp(zv) => Ok(Inverse::Lp(zv.map(|v| 1.0 / v))),
        })
        .collect::<Result<_>>()?;
    let chol = factor_schur(solver.schur(x, &zinv))?;

    // Predictor: Rc = −XZ.
    let rc_aff: Vec<Value> = x
        .iter()
        .zip(z.iter())
        .map(|(a, b)| match (a, b) {
            (Value::Psd(a), Value::Psd(b)) => Value::Psd(-(a * b)),
            (Value::Lp(a), Value::Lp(b)) => Value::Lp(-a.component_mul(b)),
            _ => unreachable!(),
        })
        .collect();
    let aff = solver.direction(x, &zinv, &chol, rp, rd, &rc_aff);
    let ap = (settings.step_fraction * max_step(x, &aff.dx)?).min(1.0);
    let ad = (settings.step_fraction * max_step(z, &aff.dz)?).min(1.0);
    let mut x_aff = x.to_vec();
    let mut z_aff = z.to_vec();
    axpy_values(&mut x_aff, ap, &aff.dx);
    axpy_values(&mut z_aff, ad, &aff.dz);
    let xz_aff: f64 = x_aff.iter().zip(&z_aff).map(|(a, b)| value_dot(a, b)).sum();
    let ratio = (xz_aff / xz).clamp(0.0, 1.0);
    let sigma = ratio.powi(if ap.min(ad) > 0.2 { 3 } else { 2 }).max(0.0);

    // Corrector: Rc = σμI − XZ − dXa·dZa.
    let rc: Vec<Value> = rc_aff
        .iter()
        .zip(aff.dx.iter().zip(&aff.dz))
        .map(|(r, (dx, dz))| match (r, dx, dz) {
            (Value::Psd(r), Value::Psd(dx), Value::Psd(dz)) => {
                let n = r.nrows();
                Value::Psd(r - dx * dz + RMat::identity(n, n) * (sigma * mu))
            }
            (Value::Lp(r), Value::Lp(dx), Value::Lp(dz)) => {
                Value::Lp((r - dx.component_mul(dz)).add_scalar(sigma * mu))
            }
            _ => unreachable!(),
        })
        .collect();
    let dir = solver.direction(x, &zinv, &chol, rp, rd, &rc);
    let ap = (settings.step_fraction * max_step(x, &dir.dx)?).min(1.0);
    let ad = (settings.step_fraction * max_step(z, &dir.dz)?).min(1.0);
    axpy_values(x, ap, &dir.dx);
    axpy_values(z, ad, &dir.dz);
    y.axpy(ad, &dir.dy, 1.0);
    Ok(())
}
