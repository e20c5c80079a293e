//! Small dense linear-algebra helpers shared by the model and the optimizers.

use nalgebra::{Cholesky, DMatrix, DVector};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

/// Default cap on the condition estimate of `HᴴH` before it is declared singular.
pub const DEFAULT_COND_CAP: f64 = 1e12;

/// Inverse of a Hermitian positive-definite matrix through its Cholesky factor.
///
/// Returns `Err(cond)` when the factorization fails or the condition estimate
/// `(max Lᵢᵢ / min Lᵢᵢ)²` exceeds `cond_cap`; `cond` is `inf` on failure.
pub fn hermitian_pd_inverse(a: &CMat, cond_cap: f64) -> std::result::Result<CMat, f64> {
    let n = a.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    // Symmetrize so the factorization reads a consistent lower triangle.
    let sym = (a + a.adjoint()).scale(0.5);
    let chol = Cholesky::new(sym).ok_or(f64::INFINITY)?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return Err(f64::INFINITY);
        }
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let cond = (hi / lo).powi(2);
    if cond > cond_cap {
        return Err(cond);
    }
    let mut inv = chol.inverse();
    // Force exact Hermitian symmetry and a real diagonal.
    for i in 0..n {
        inv[(i, i)] = C64::new(inv[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (inv[(i, j)] + inv[(j, i)].conj()).scale(0.5);
            inv[(i, j)] = v;
            inv[(j, i)] = v.conj();
        }
    }
    Ok(inv)
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Embeds a real matrix as complex.
pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}
