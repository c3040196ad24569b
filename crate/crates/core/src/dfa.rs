//! Detrended fluctuation analysis and its moving-window exponent track.
//!
//! The profile `Y(k) = sum_{i<=k} (x_i - mean)` is cut into non-overlapping
//! boxes of size `n`; a polynomial of order `detrend_order` is removed from
//! each box by least squares, and `F(n)` is the root of the mean squared
//! residual over all boxes. The scaling exponent `alpha` is the slope of
//! `ln F(n)` against `ln n`. Uncorrelated increments give `alpha = 1/2`,
//! a random walk `3/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::stats::ols_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coverage {
    /// Boxes laid from the start; the tail remainder is dropped.
    Forward,
    /// A second pass laid from the end; both passes are averaged.
    BothEnds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaConfig {
    pub min_box: usize,
    /// Largest box is `floor(max_box_fraction * N)`.
    pub max_box_fraction: f64,
    pub n_boxes: usize,
    pub detrend_order: usize,
    pub coverage: Coverage,
}

impl Default for DfaConfig {
    fn default() -> Self {
        Self {
            min_box: 4,
            max_box_fraction: 0.25,
            n_boxes: 16,
            detrend_order: 1,
            coverage: Coverage::BothEnds,
        }
    }
}

impl DfaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_box < self.detrend_order + 2 {
            return Err(Error::Config(format!(
                "min_box {} must be at least detrend_order + 2 = {}",
                self.min_box,
                self.detrend_order + 2
            )));
        }
        if self.n_boxes < 4 {
            return Err(Error::Config("n_boxes must be at least 4".into()));
        }
        if !(self.max_box_fraction > 0.0 && self.max_box_fraction <= 0.5) {
            return Err(Error::Config(
                "max_box_fraction must lie in (0, 0.5]".into(),
            ));
        }
        Ok(())
    }

    /// Log-spaced box sizes for a profile of length `n`, deduplicated.
    pub fn box_sizes(&self, n: usize) -> Vec<usize> {
        let lo = self.min_box.max(4).max(self.detrend_order + 2);
        let hi = (self.max_box_fraction * n as f64).floor() as usize;
        if hi < lo {
            return Vec::new();
        }
        if hi == lo {
            return vec![lo];
        }
        let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
        let mut sizes: Vec<usize> = (0..self.n_boxes)
            .map(|i| {
                let f = i as f64 / (self.n_boxes - 1) as f64;
                (llo + f * (lhi - llo)).exp().round() as usize
            })
            .map(|s| s.clamp(lo, hi))
            .collect();
        sizes.dedup();
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    pub box_sizes: Vec<usize>,
    pub fluctuations: Vec<f64>,
    pub alpha: Option<f64>,
    pub alpha_stderr: Option<f64>,
    /// Box-size range the exponent was fitted over.
    pub fit_range: Option<(usize, usize)>,
    /// Pairs inside the fit range skipped because `F(n) = 0`.
    pub zero_excluded: usize,
}

impl DfaResult {
    /// `|alpha - 1/2|`: distance from uncorrelated behaviour.
    pub fn coherence(&self) -> Option<f64> {
        self.alpha.map(|a| (a - 0.5).abs())
    }
}

/// Cumulative sum of the mean-removed values.
pub fn build_profile(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 4 {
        return Err(Error::TooShort {
            len: values.len(),
            min: 4,
        });
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut acc = 0.0;
    Ok(values
        .iter()
        .map(|v| {
            acc += v - mean;
            acc
        })
        .collect())
}

/// Orthonormal polynomial basis (degrees `0..=order`) on `0..n`, built by
/// twice-applied modified Gram-Schmidt on a centred, scaled abscissa.
/// Degenerate directions are dropped, which leaves the box with fewer fitted
/// terms rather than failing.
fn poly_basis(n: usize, order: usize) -> Vec<Vec<f64>> {
    let half = (n as f64 - 1.0) / 2.0;
    let scale = if half > 0.0 { half } else { 1.0 };
    let u: Vec<f64> = (0..n).map(|i| (i as f64 - half) / scale).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for deg in 0..=order {
        let mut v: Vec<f64> = u.iter().map(|x| x.powi(deg as i32)).collect();
        let raw = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 * raw.max(1.0) {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Sum of squared residuals of `seg` after projecting out `basis`.
fn detrended_ssr(seg: &[f64], basis: &[Vec<f64>], work: &mut [f64]) -> f64 {
    work.copy_from_slice(seg);
    for q in basis {
        let dot: f64 = work.iter().zip(q).map(|(a, b)| a * b).sum();
        work.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
    }
    work.iter().map(|r| r * r).sum()
}

/// `F(n)` for every admissible box size; `alpha` is left unset.
pub fn fluctuation_function(profile: &[f64], cfg: &DfaConfig) -> Result<DfaResult> {
    cfg.validate()?;
    let n = profile.len();
    if n < 2 * cfg.min_box {
        return Err(Error::TooShort {
            len: n,
            min: 2 * cfg.min_box,
        });
    }
    let sizes = cfg.box_sizes(n);
    if sizes.is_empty() {
        return Err(Error::Config(format!("no admissible box size for N = {n}")));
    }
    let mut fluctuations = Vec::with_capacity(sizes.len());
    for &size in &sizes {
        let basis = poly_basis(size, cfg.detrend_order);
        let count = n / size;
        let mut work = vec![0.0; size];
        let mut total = 0.0;
        let mut boxes = 0usize;
        for b in 0..count {
            total += detrended_ssr(&profile[b * size..(b + 1) * size], &basis, &mut work);
            boxes += 1;
        }
        if cfg.coverage == Coverage::BothEnds {
            for b in 0..count {
                let end = n - b * size;
                total += detrended_ssr(&profile[end - size..end], &basis, &mut work);
                boxes += 1;
            }
        }
        let f = (total / (boxes * size) as f64).sqrt();
        fluctuations.push(f);
    }
    Ok(DfaResult {
        box_sizes: sizes,
        fluctuations,
        alpha: None,
        alpha_stderr: None,
        fit_range: None,
        zero_excluded: 0,
    })
}

/// Least-squares slope of `ln F` against `ln n` over `fit_range` (inclusive,
/// default: every box size).
pub fn fit_exponent(r: &DfaResult, fit_range: Option<(usize, usize)>) -> Result<DfaResult> {
    let (lo, hi) = fit_range.unwrap_or((
        *r.box_sizes.first().unwrap_or(&0),
        *r.box_sizes.last().unwrap_or(&0),
    ));
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut zero = 0;
    for (&n, &f) in r.box_sizes.iter().zip(&r.fluctuations) {
        if n < lo || n > hi {
            continue;
        }
        if f > 0.0 {
            x.push((n as f64).ln());
            y.push(f.ln());
        } else {
            zero += 1;
        }
    }
    if x.len() < 4 {
        return Err(Error::InsufficientData {
            got: x.len(),
            need: 4,
        });
    }
    let line = ols_line(&x, &y).ok_or(Error::InsufficientData {
        got: x.len(),
        need: 4,
    })?;
    Ok(DfaResult {
        alpha: Some(line.slope),
        alpha_stderr: Some(line.slope_stderr),
        fit_range: Some((lo, hi)),
        zero_excluded: zero,
        ..r.clone()
    })
}

/// Profile, fluctuation function and exponent of one series.
pub fn dfa(values: &[f64], cfg: &DfaConfig) -> Result<DfaResult> {
    let profile = build_profile(values)?;
    fit_exponent(&fluctuation_function(&profile, cfg)?, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub end_time: f64,
    /// `None` marks a window whose exponent could not be fitted.
    pub alpha: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSeries {
    pub window_length: usize,
    pub step: usize,
    pub entries: Vec<AlphaEntry>,
}

impl AlphaSeries {
    /// `end_time,alpha,stderr`; gaps are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("end_time,alpha,stderr\n");
        for e in &self.entries {
            let f = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            out.push_str(&format!(
                "{:?},{},{}\n",
                e.end_time,
                f(e.alpha),
                f(e.stderr)
            ));
        }
        out
    }
}

/// Right-aligned sliding windows of `window_length` observations, advancing by
/// `step`; each entry is stamped with its window's last time.
pub fn moving_dfa(
    s: &TimeSeries,
    window_length: usize,
    step: usize,
    cfg: &DfaConfig,
) -> Result<AlphaSeries> {
    cfg.validate()?;
    if step == 0 {
        return Err(Error::Config("step must be at least 1".into()));
    }
    if window_length > s.len() {
        return Err(Error::TooShort {
            len: s.len(),
            min: window_length,
        });
    }
    if window_length < 4 * cfg.min_box {
        return Err(Error::Config(format!(
            "window {window_length} is shorter than 4 x min_box = {}",
            4 * cfg.min_box
        )));
    }
    let values = s.values();
    let times = s.times();
    let ends: Vec<usize> = (window_length..=s.len()).step_by(step).collect();
    let entries = ends
        .par_iter()
        .map(|&end| {
            let fit = dfa(&values[end - window_length..end], cfg).ok();
            AlphaEntry {
                end_time: times[end - 1],
                alpha: fit.as_ref().and_then(|r| r.alpha),
                stderr: fit.as_ref().and_then(|r| r.alpha_stderr),
            }
        })
        .collect();
    Ok(AlphaSeries {
        window_length,
        step,
        entries,
    })
}
