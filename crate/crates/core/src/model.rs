//! System model: configuration, channel and RIS state types, and the
//! deterministic ZF / spectral-efficiency / energy-efficiency arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_pd_inverse, CMat, C64, DEFAULT_COND_CAP};

/// Absolute slack (watts) allowed on the transmit power budget.
pub const POWER_TOL: f64 = 1e-9;

/// Scenario constants. Powers in watts, bandwidth in hertz, distances in
/// meters, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// BS planar array, horizontal elements.
    pub m1: usize,
    /// BS planar array, vertical elements.
    pub m2: usize,
    /// RIS horizontal elements.
    pub n1: usize,
    /// RIS vertical elements.
    pub n2: usize,
    /// Number of single-antenna users.
    pub k: usize,
    pub p_static_w: f64,
    /// Dissipation of one RIS element whose diode is ON.
    pub p0_w: f64,
    /// Transmit power budget.
    pub pmax_w: f64,
    /// Power amplifier efficiency.
    pub nu: f64,
    /// Per-user minimum spectral efficiency, bits/s/Hz.
    pub se_min: f64,
    pub bw_hz: f64,
    /// Thermal noise density, dBm/Hz.
    pub n0_dbm_hz: f64,
    pub fc_hz: f64,
    pub d_bs_m: f64,
    pub d_ue_m: f64,
    /// Linear Rician factor.
    pub kappa: f64,
    /// Path loss at 1 m, dB.
    pub pl0_db: f64,
    pub pl_exp: f64,
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub elevation_min: f64,
    pub elevation_max: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            m1: 4,
            m2: 2,
            n1: 8,
            n2: 8,
            k: 4,
            p_static_w: 10.0,
            p0_w: 10e-3,
            pmax_w: 1.0,
            nu: 1.0,
            se_min: 1e-4,
            bw_hz: 180e3,
            n0_dbm_hz: -174.0,
            fc_hz: 3.5e9,
            d_bs_m: 200.0,
            d_ue_m: 200.0,
            kappa: 10.0,
            pl0_db: 30.0,
            pl_exp: 2.2,
            azimuth_min: -PI / 2.0,
            azimuth_max: PI / 2.0,
            elevation_min: PI / 3.0,
            elevation_max: 2.0 * PI / 3.0,
        }
    }
}

impl SystemConfig {
    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }

    /// Receiver noise power `BW · 10^((n0 − 30)/10)` in watts.
    pub fn noise_power(&self) -> f64 {
        self.bw_hz * 10f64.powf((self.n0_dbm_hz - 30.0) / 10.0)
    }

    /// Minimum received power meeting `se_min`.
    pub fn p_min(&self) -> f64 {
        self.noise_power() * (2f64.powf(self.se_min) - 1.0)
    }

    /// Checks every invariant and returns the config unchanged when valid.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [("m1", self.m1), ("m2", self.m2), ("n1", self.n1), ("n2", self.n2), ("k", self.k)] {
            if v == 0 {
                return bad(format!("{name} must be a positive integer"));
            }
        }
        for (name, v) in [
            ("p_static_w", self.p_static_w),
            ("p0_w", self.p0_w),
            ("pmax_w", self.pmax_w),
            ("bw_hz", self.bw_hz),
            ("fc_hz", self.fc_hz),
            ("d_bs_m", self.d_bs_m),
            ("d_ue_m", self.d_ue_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be strictly positive and finite, got {v}"));
            }
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu must lie in (0, 1], got {}", self.nu));
        }
        if !(self.se_min >= 0.0) || !self.se_min.is_finite() {
            return bad(format!("se_min must be nonnegative, got {}", self.se_min));
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa must be nonnegative, got {}", self.kappa));
        }
        for (name, v) in [("n0_dbm_hz", self.n0_dbm_hz), ("pl0_db", self.pl0_db), ("pl_exp", self.pl_exp)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.azimuth_min <= self.azimuth_max) || !(self.elevation_min <= self.elevation_max) {
            return bad("angle ranges must satisfy min <= max".into());
        }
        let cap = self.m().min(self.n());
        if self.k > cap {
            return bad(format!(
                "K = {} exceeds min(M, N) = {cap}; zero-forcing needs K <= min(M, N)",
                self.k
            ));
        }
        Ok(())
    }
}

/// Azimuth/elevation pair, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

/// Angles used to build the LoS components of one channel draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleDraw {
    /// RIS-side direction of the RIS–BS link.
    pub bs_link_ris_side: Direction,
    /// BS-side direction of the RIS–BS link.
    pub bs_link_bs_side: Direction,
    /// RIS-side direction towards each user.
    pub users: Vec<Direction>,
}

/// One draw of the RIS–BS channel `G` (N×M) and RIS–user channel `F` (N×K).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMat,
    pub f: CMat,
    pub seed: u64,
    pub angles: Option<AngleDraw>,
}

impl ChannelRealization {
    /// Wraps explicit matrices, checking that `G` and `F` share the RIS dimension.
    pub fn from_matrices(g: CMat, f: CMat) -> Result<Self> {
        if g.nrows() != f.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "G has {} rows but F has {}",
                g.nrows(),
                f.nrows()
            )));
        }
        if g.iter().chain(f.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DimensionMismatch("channel entries must be finite".into()));
        }
        Ok(Self { g, f, seed: 0, angles: None })
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn k(&self) -> usize {
        self.f.ncols()
    }
}

/// Binary RIS phase vector `q ∈ {−1, +1}^N`. `q_n = −1` ⇔ `θ_n = π` ⇔ diode ON.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct RisConfig(Vec<i8>);

impl TryFrom<Vec<i8>> for RisConfig {
    type Error = Error;

    fn try_from(q: Vec<i8>) -> Result<Self> {
        RisConfig::new(q)
    }
}

impl From<RisConfig> for Vec<i8> {
    fn from(r: RisConfig) -> Self {
        r.0
    }
}

impl RisConfig {
    pub fn new(q: Vec<i8>) -> Result<Self> {
        if let Some(bad) = q.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidConfig(format!("RIS entries must be ±1, found {bad}")));
        }
        Ok(Self(q))
    }

    /// Every element OFF (`Θ = I`).
    pub fn all_off(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn all_on(n: usize) -> Self {
        Self(vec![-1; n])
    }

    /// Decodes an enumeration index; bit `N−1−n` set means `q_n = +1`, so
    /// integer order equals lexicographic order with `−1 < +1`.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| if (index >> (n - 1 - i)) & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn index(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &v| (acc << 1) | u64::from(v == 1))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn flip(&mut self, n: usize) {
        self.0[n] = -self.0[n];
    }

    pub fn flipped(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.flip(n);
        out
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&v| -v).collect())
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&v| i64::from(v)).sum()
    }

    /// Number of ON elements, `(N − Σq)/2`.
    pub fn on_count(&self) -> usize {
        ((self.0.len() as i64 - self.sum()) / 2) as usize
    }

    /// Phase vector `θ_n ∈ {0, π}`.
    pub fn phases(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|&v| if v == 1 { 0.0 } else { std::f64::consts::PI })
            .collect()
    }
}

/// Per-user received powers from the Dinkelbach solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    /// Dinkelbach ratios in bits/s/Hz per watt, starting with the initial `λ = 0`.
    pub lambda_trace: Vec<f64>,
    pub iterations: usize,
}

impl PowerAllocation {
    /// Allocation given directly (no solver trace).
    pub fn fixed(p: Vec<f64>) -> Self {
        Self { p, lambda_trace: Vec::new(), iterations: 0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_trace.last().copied().unwrap_or(0.0)
    }
}

/// Which half of an AO iteration produced a trace point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Power allocation with the RIS held fixed.
    Power,
    /// RIS configuration with the powers held fixed.
    Ris,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Power => "power",
            Stage::Ris => "ris",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub stage: Stage,
    pub se: f64,
    pub ee: f64,
    pub tx_power: f64,
    pub on_count: usize,
}

/// Metrics of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EEReport {
    /// bits/s/Hz
    pub se: f64,
    /// bits/Joule
    pub ee: f64,
    /// watts
    pub tx_power: f64,
    pub on_count: usize,
    pub feasible: bool,
    pub trace: Vec<TracePoint>,
}

/// Cascade channel `Hᴴ = Fᴴ diag(q) G` (K×M).
pub fn effective_channel(chan: &ChannelRealization, ris: &RisConfig) -> Result<CMat> {
    let (n, m, k) = (chan.n(), chan.m(), chan.k());
    if ris.len() != n {
        return Err(Error::DimensionMismatch(format!("RIS has {} elements, channel has N = {n}", ris.len())));
    }
    let q = ris.values();
    let mut hh = CMat::zeros(k, m);
    for kk in 0..k {
        for mm in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for nn in 0..n {
                let term = chan.f[(nn, kk)].conj() * chan.g[(nn, mm)];
                acc += if q[nn] == 1 { term } else { -term };
            }
            hh[(kk, mm)] = acc;
        }
    }
    Ok(hh)
}

/// `(HᴴH)^{-1}` for a K×M cascade channel.
pub fn gram_inverse(hh: &CMat, cond_cap: f64) -> Result<CMat> {
    let gram = hh * hh.adjoint();
    hermitian_pd_inverse(&gram, cond_cap).map_err(|cond| Error::SingularChannel { cond })
}

/// Transmit-power coefficients `t_k = [(HᴴH)^{-1}]_kk` with the default condition cap.
pub fn t_coefficients(hh: &CMat) -> Result<Vec<f64>> {
    t_coefficients_capped(hh, DEFAULT_COND_CAP)
}

pub fn t_coefficients_capped(hh: &CMat, cond_cap: f64) -> Result<Vec<f64>> {
    let inv = gram_inverse(hh, cond_cap)?;
    let t: Vec<f64> = (0..inv.nrows()).map(|i| inv[(i, i)].re).collect();
    if t.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::SingularChannel { cond: f64::INFINITY });
    }
    Ok(t)
}

/// Zero-forcing precoder `W = H (HᴴH)^{-1} P^{1/2}` (M×K).
pub fn zf_precoder(hh: &CMat, p: &[f64]) -> Result<CMat> {
    if p.len() != hh.nrows() {
        return Err(Error::DimensionMismatch(format!("{} powers for {} users", p.len(), hh.nrows())));
    }
    if p.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidConfig("powers must be nonnegative".into()));
    }
    let inv = gram_inverse(hh, DEFAULT_COND_CAP)?;
    let mut w = hh.adjoint() * inv;
    for (kk, &pk) in p.iter().enumerate() {
        let s = pk.sqrt();
        w.column_mut(kk).iter_mut().for_each(|z| *z *= s);
    }
    Ok(w)
}

/// Σ_k log₂(1 + p_k/σ²)
pub fn spectral_efficiency(p: &[f64], noise_power: f64) -> f64 {
    p.iter().map(|&pk| (pk / noise_power).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Σ_k p_k t_k
pub fn transmit_power(p: &[f64], t: &[f64]) -> f64 {
    p.iter().zip(t).map(|(a, b)| a * b).sum()
}

/// SE, EE and feasibility of the operating point `(q, p)` with the channel
/// summarized by its coefficients `t`.
pub fn metrics(cfg: &SystemConfig, ris: &RisConfig, p: &[f64], t: &[f64]) -> EEReport {
    let se = spectral_efficiency(p, cfg.noise_power());
    let tx_power = transmit_power(p, t);
    let on_count = ris.on_count();
    let denom = cfg.p_static_w + cfg.p0_w * on_count as f64 + tx_power / cfg.nu;
    let ee = cfg.bw_hz * se / denom;
    let p_min = cfg.p_min();
    let feasible = tx_power <= cfg.pmax_w + POWER_TOL && p.iter().all(|&pk| pk >= p_min * (1.0 - 1e-12));
    EEReport { se, ee, tx_power, on_count, feasible, trace: Vec::new() }
}

/// [`metrics`] with `t` computed from the channel.
pub fn evaluate(cfg: &SystemConfig, chan: &ChannelRealization, ris: &RisConfig, p: &[f64]) -> Result<EEReport> {
    let t = t_coefficients(&effective_channel(chan, ris)?)?;
    Ok(metrics(cfg, ris, p, &t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scalar_identity_channel() {
        let chan = ChannelRealization::from_matrices(DMatrix::from_element(1, 1, c(1.0, 0.0)), DMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap();
        let hh = effective_channel(&chan, &RisConfig::all_off(1)).unwrap();
        assert_eq!(hh[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn all_off_gives_plain_product() {
        let g = DMatrix::from_fn(3, 2, |i, j| c(i as f64 + 0.5, j as f64 - 0.25));
        let f = DMatrix::from_fn(3, 2, |i, j| c((i * j) as f64, 1.0 - i as f64));
        let chan = ChannelRealization::from_matrices(g.clone(), f.clone()).unwrap();
        let hh = effective_channel(&chan, &RisConfig::all_off(3)).unwrap();
        assert!((hh - f.adjoint() * g).norm() < 1e-14);
    }

    #[test]
    fn mismatched_ris_length_is_rejected() {
        let chan = ChannelRealization::from_matrices(CMat::zeros(3, 2), CMat::zeros(3, 1)).unwrap();
        assert!(matches!(effective_channel(&chan, &RisConfig::all_off(2)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn t_of_identity_and_diagonal_gram() {
        let eye = CMat::identity(3, 3);
        assert_eq!(t_coefficients(&eye).unwrap(), vec![1.0, 1.0, 1.0]);
        // HᴴH = diag(2, 4)
        let hh = DMatrix::from_row_slice(2, 2, &[c(2f64.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)]);
        let t = t_coefficients(&hh).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-15 && (t[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_gram_is_singular() {
        let hh = DMatrix::from_row_slice(2, 3, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(2.0, 0.0), c(0.0, 1.0)]);
        assert!(matches!(t_coefficients(&hh), Err(Error::SingularChannel { .. })));
    }

    #[test]
    fn zf_single_user() {
        let hh = DMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let w = zf_precoder(&hh, &[4.0]).unwrap();
        assert!((w[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!(w[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn se_and_ee_closed_values() {
        let cfg = SystemConfig::default();
        let s2 = cfg.noise_power();
        let ris = RisConfig::all_off(cfg.n());
        let rep = metrics(&cfg, &ris, &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!((rep.se, rep.ee), (0.0, 0.0));
        let rep = metrics(&cfg, &ris, &[s2, 3.0 * s2], &[1.0, 1.0]);
        assert!((rep.se - 3.0).abs() < 1e-12);
    }

    #[test]
    fn table_noise_power() {
        // 180e3 · 10^(-20.4) W, evaluated independently
        let s2 = SystemConfig::default().noise_power();
        assert!((s2 - 7.165_929_069_962_975e-16).abs() < 1e-28, "{s2}");
    }

    #[test]
    fn ee_uses_on_count() {
        let cfg = SystemConfig { n1: 2, n2: 2, k: 1, ..SystemConfig::default() };
        let off = metrics(&cfg, &RisConfig::all_off(4), &[1e-13], &[1e12]);
        let on = metrics(&cfg, &RisConfig::new(vec![-1, -1, 1, 1]).unwrap(), &[1e-13], &[1e12]);
        assert_eq!(on.on_count, 2);
        let expect = cfg.bw_hz * off.se / (cfg.p_static_w + 2.0 * cfg.p0_w + 0.1);
        assert!((on.ee - expect).abs() / expect < 1e-14);
        assert!(on.ee < off.ee);
    }

    #[test]
    fn config_rejects_too_many_users() {
        let cfg = SystemConfig { k: 32, ..SystemConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        assert!(SystemConfig::default().validate().is_ok());
    }

    #[test]
    fn on_count_matches_l0_norm_exhaustively() {
        for n in 1..=12usize {
            for idx in 0..(1u64 << n) {
                let r = RisConfig::from_index(idx, n);
                let l0 = r.phases().iter().filter(|&&th| th != 0.0).count();
                assert_eq!(r.on_count(), l0);
                assert_eq!(r.index(), idx);
            }
        }
    }
}
