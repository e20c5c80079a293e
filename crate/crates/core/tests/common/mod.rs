//! Reference implementations used as oracles. They share no code with the
//! library beyond the data types.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use ris_ee::{ChannelRealization, SystemConfig};

pub type C = Complex<f64>;
pub type M = DMatrix<C>;

/// Gauss-Jordan inverse with partial pivoting.
pub fn gj_inverse(a: &M) -> M {
    let n = a.nrows();
    let mut w = a.clone();
    let mut inv = M::identity(n, n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| w[(i, col)].norm().total_cmp(&w[(j, col)].norm())).unwrap();
        w.swap_rows(col, piv);
        inv.swap_rows(col, piv);
        let d = w[(col, col)];
        assert!(d.norm() > 0.0, "singular");
        for j in 0..n {
            w[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = w[(i, col)];
                for j in 0..n {
                    let (wc, ic) = (w[(col, j)], inv[(col, j)]);
                    w[(i, j)] -= f * wc;
                    inv[(i, j)] -= f * ic;
                }
            }
        }
    }
    inv
}

/// `Fᴴ diag(q) G` by explicit dense products.
pub fn triple_product(chan: &ChannelRealization, q: &[f64]) -> M {
    let n = chan.n();
    let d = M::from_fn(n, n, |i, j| if i == j { C::new(q[i], 0.0) } else { C::new(0.0, 0.0) });
    chan.f.adjoint() * d * &chan.g
}

/// Diagonal of `(HᴴH)⁻¹` via Gauss-Jordan.
pub fn t_direct(hh: &M) -> Vec<f64> {
    let inv = gj_inverse(&(hh * hh.adjoint()));
    (0..inv.nrows()).map(|k| inv[(k, k)].re).collect()
}

/// `−½P0 Σq + Σ p_k t_k(q)` from scratch, at real (possibly fractional) `q`.
pub fn g_direct(chan: &ChannelRealization, p: &[f64], p0: f64, q: &[f64]) -> f64 {
    let t = t_direct(&triple_product(chan, q));
    -0.5 * p0 * q.iter().sum::<f64>() + p.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>()
}

pub fn se_direct(p: &[f64], sigma2: f64) -> f64 {
    p.iter().map(|pk| (1.0 + pk / sigma2).log2()).sum()
}

/// Root of `Σ max{ζ − tσ², t·p_min} = Pmax` by bisection.
pub fn zeta_bisection(t: &[f64], sigma2: f64, p_min: f64, pmax: f64) -> f64 {
    let s = |z: f64| t.iter().map(|tk| (z - tk * sigma2).max(tk * p_min)).sum::<f64>() - pmax;
    let (mut lo, mut hi) = (0.0, pmax + t.iter().map(|tk| tk * (sigma2 + p_min)).sum::<f64>());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum of a concave `f` over `{p ≥ p_min, Σ p_k t_k ≤ Pmax}`: zooming
/// grid over all but the last coordinate, golden section on the last one.
pub fn grid_max(t: &[f64], p_min: f64, pmax: f64, steps: usize, levels: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let k = t.len();
    let outer = k - 1;
    let inner = |head: &[f64]| -> Option<f64> {
        let left = pmax - head.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
        let top = left / t[outer];
        if top < p_min {
            return None;
        }
        let mut p = head.to_vec();
        p.push(p_min);
        let (_, v) = golden_max(p_min, top, |x| {
            p[outer] = x;
            f(&p)
        });
        Some(v)
    };
    if outer == 0 {
        return inner(&[]).unwrap();
    }
    let reserve = t[outer] * p_min;
    let mut lo: Vec<f64> = vec![p_min; outer];
    let mut hi: Vec<f64> = (0..outer).map(|d| (pmax - reserve) / t[d]).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_p = lo.clone();
    for _ in 0..levels {
        for idx in 0..(steps + 1).pow(outer as u32) {
            let mut rem = idx;
            let head: Vec<f64> = (0..outer)
                .map(|d| {
                    let i = rem % (steps + 1);
                    rem /= steps + 1;
                    lo[d] + (hi[d] - lo[d]) * i as f64 / steps as f64
                })
                .collect();
            if let Some(v) = inner(&head) {
                if v > best {
                    best = v;
                    best_p = head;
                }
            }
        }
        for d in 0..outer {
            let w = 2.0 * (hi[d] - lo[d]) / steps as f64;
            lo[d] = (best_p[d] - w).max(p_min);
            hi[d] = (best_p[d] + w).min((pmax - reserve) / t[d]);
        }
    }
    best
}

/// Golden-section maximum of a unimodal scalar function on `[a, b]`.
pub fn golden_max(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..120 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Desk-scale scenario with an `n1 × n2` RIS, `m1 × m2` BS array and `k` users.
pub fn scenario(n1: usize, n2: usize, m1: usize, m2: usize, k: usize) -> SystemConfig {
    SystemConfig { n1, n2, m1, m2, k, ..SystemConfig::default() }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
