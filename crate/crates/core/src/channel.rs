//! Seeded Rician channel synthesis.
//!
//! Each link is `z (√(κ/(κ+1)) LoS + √(1/(κ+1)) NLoS)` with a planar-array
//! steering-vector LoS term, i.i.d. `CN(0, 1)` scattering and amplitude path
//! loss `z = 10^(−PL/20)`, `PL(d) = pl0_dB + 10·pl_exp·log₁₀(d)`.
//!
//! Randomness comes from independent ChaCha streams keyed by component, so
//! adding users never perturbs the RIS–BS draw.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec, C64};
use crate::model::{AngleDraw, ChannelRealization, Direction, SystemConfig};

const STREAM_BS_ANGLES: u64 = 1;
const STREAM_BS_NLOS: u64 = 2;
const STREAM_USER_ANGLES: u64 = 3;
const STREAM_USER_NLOS: u64 = 4;

/// Random generator for substream `(component, index)` of a master seed.
pub fn substream(seed: u64, component: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((component << 32) | index);
    rng
}

/// Unit-norm planar steering vector of an `n1 × n2` half-wavelength array.
///
/// Element `(i, j)` (flattened as `i·n2 + j`) carries phase
/// `π·i·sinθ·sinφ + π·j·cosφ`.
pub fn steering_vector(n1: usize, n2: usize, azimuth: f64, elevation: f64) -> CVec {
    let scale = 1.0 / ((n1 * n2) as f64).sqrt();
    let horiz = PI * azimuth.sin() * elevation.sin();
    let vert = PI * elevation.cos();
    CVec::from_fn(n1 * n2, |idx, _| {
        let (i, j) = (idx / n2, idx % n2);
        C64::from_polar(scale, horiz * i as f64 + vert * j as f64)
    })
}

/// Amplitude path loss at distance `d` meters.
pub fn path_loss_amplitude(cfg: &SystemConfig, d: f64) -> f64 {
    let pl_db = cfg.pl0_db + 10.0 * cfg.pl_exp * d.log10();
    10f64.powf(-pl_db / 20.0)
}

/// LoS and NLoS mixing weights `(√(κ/(κ+1)), √(1/(κ+1)))`.
fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    }
}

fn draw_direction<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> Direction {
    let pick = |rng: &mut R, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    Direction {
        azimuth: pick(rng, cfg.azimuth_min, cfg.azimuth_max),
        elevation: pick(rng, cfg.elevation_min, cfg.elevation_max),
    }
}

/// Standard circularly-symmetric complex Gaussian, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws `G` and `F` for the configured geometry. Pure in `(cfg, seed)`.
pub fn draw_channel(cfg: &SystemConfig, seed: u64) -> ChannelRealization {
    let (n, m, k) = (cfg.n(), cfg.m(), cfg.k);
    let (w_los, w_nlos) = rician_weights(cfg.kappa);

    let mut rng = substream(seed, STREAM_BS_ANGLES, 0);
    let ris_side = draw_direction(cfg, &mut rng);
    let bs_side = draw_direction(cfg, &mut rng);
    let a_n = steering_vector(cfg.n1, cfg.n2, ris_side.azimuth, ris_side.elevation);
    let a_m = steering_vector(cfg.m1, cfg.m2, bs_side.azimuth, bs_side.elevation);
    let los_scale = ((n * m) as f64).sqrt();
    let z_bs = path_loss_amplitude(cfg, cfg.d_bs_m);
    let mut rng = substream(seed, STREAM_BS_NLOS, 0);
    // Column-major fill order keeps the stream layout independent of N.
    let g = CMat::from_fn(n, m, |i, j| {
        let los = a_n[i] * a_m[j].conj() * los_scale;
        let nlos = complex_gaussian(&mut rng);
        (los * w_los + nlos * w_nlos) * z_bs
    });

    let z_ue = path_loss_amplitude(cfg, cfg.d_ue_m);
    let user_scale = (n as f64).sqrt();
    let mut f = CMat::zeros(n, k);
    let mut users = Vec::with_capacity(k);
    for user in 0..k {
        let dir = draw_direction(cfg, &mut substream(seed, STREAM_USER_ANGLES, user as u64));
        let a = steering_vector(cfg.n1, cfg.n2, dir.azimuth, dir.elevation);
        let mut rng = substream(seed, STREAM_USER_NLOS, user as u64);
        for i in 0..n {
            let nlos = complex_gaussian(&mut rng);
            f[(i, user)] = (a[i] * user_scale * w_los + nlos * w_nlos) * z_ue;
        }
        users.push(dir);
    }

    ChannelRealization {
        g,
        f,
        seed,
        angles: Some(AngleDraw { bs_link_ris_side: ris_side, bs_link_bs_side: bs_side, users }),
    }
}

/// Unit-scale i.i.d. `CN(0, 1)` channel with `N` RIS elements, `M` BS
/// antennas and `K` users. Used for synthetic studies and tests.
pub fn iid_channel(n: usize, m: usize, k: usize, seed: u64) -> ChannelRealization {
    let mut rng = substream(seed, STREAM_BS_NLOS, 0);
    let g = CMat::from_fn(n, m, |_, _| complex_gaussian(&mut rng));
    let mut rng = substream(seed, STREAM_USER_NLOS, 0);
    let f = CMat::from_fn(n, k, |_, _| complex_gaussian(&mut rng));
    ChannelRealization { g, f, seed, angles: None }
}
