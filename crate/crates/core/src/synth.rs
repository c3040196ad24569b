//! Seeded synthetic signals used as ground truth.
//!
//! Uniform draws come from ChaCha20 (`rand_chacha::ChaCha20Rng`, seeded with
//! `SeedableRng::seed_from_u64`), whose output stream is fixed by its
//! specification. Each uniform is the top 53 bits of one `u64` scaled by
//! `2^-53`. Gaussian pairs use the basic Box-Muller transform
//!
//! ```text
//! u1 = (k1 + 1) * 2^-53,  u2 = k2 * 2^-53
//! z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)
//! ```
//!
//! consuming `z0` then `z1`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::lppl::{eval_model, LpplParams};
use crate::series::{SeriesKind, TimeSeries};

/// Standard normal stream, bit-reproducible for a given seed.
pub struct Gaussian {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

fn check(n: usize, sigma: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(())
}

/// I.i.d. Gaussian(0, sigma^2) draws at times `1..=n`.
pub fn gen_white(n: usize, seed: u64, sigma: f64) -> Result<TimeSeries> {
    check(n, sigma)?;
    let mut g = Gaussian::new(seed);
    let values = (0..n).map(|_| sigma * g.next()).collect();
    TimeSeries::from_values(format!("white-{seed}"), values, SeriesKind::Return)
}

/// Cumulative sum of [`gen_white`] with the same seed; the first value is the
/// first white draw.
pub fn gen_brownian(n: usize, seed: u64, sigma: f64) -> Result<TimeSeries> {
    let white = gen_white(n, seed, sigma)?;
    let mut acc = 0.0;
    let values = white
        .values()
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    TimeSeries::from_values(format!("brownian-{seed}"), values, SeriesKind::Level)
}

/// The model sampled at `t = 1..=n` plus Gaussian noise.
pub fn gen_lppl(p: &LpplParams, n: usize, noise_sigma: f64, seed: u64) -> Result<TimeSeries> {
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    if !(p.t_c > n as f64) {
        return Err(Error::Config(format!(
            "t_c = {} must exceed n = {n}",
            p.t_c
        )));
    }
    p.validate((0.0, f64::INFINITY))?;
    let mut g = Gaussian::new(seed);
    let mut values = Vec::with_capacity(n);
    for k in 1..=n {
        let clean = eval_model(p, k as f64)?;
        values.push(if noise_sigma > 0.0 {
            clean + noise_sigma * g.next()
        } else {
            clean
        });
    }
    TimeSeries::from_values(format!("lppl-{seed}"), values, SeriesKind::Level)
}
