//! Log-periodic rupture-point models.
//!
//! Two variants of the critical trend are supported:
//!
//! * `power`: `y = A + B x^(-m) [1 + C cos(w ln x + phi)]`
//! * `log`:   `y = A + B ln(x) [1 + C cos(w ln x + phi)]`
//!
//! with `x = (t_c - t) / (t_c - origin)`. For fixed `(t_c, w[, m])` both are
//! linear in `(A, B, B C cos phi, B C sin phi)`, so every fit here is a grid
//! search over at most three nonlinear parameters with an exact linear solve
//! per cell, optionally polished by Levenberg-Marquardt.
//!
//! The two-stage protocol fits the oscillation-free envelope first, then the
//! normalized residual, and only accepts a rupture time when both stages
//! agree within their error bars.

mod fit;
mod linear;
mod model;
mod scan;
mod two_stage;

use serde::{Deserialize, Serialize};

pub use fit::{fit_envelope, fit_full};
pub use linear::{linear_subfit, LinearFit};
pub use model::{basis, eval_model};
pub use scan::{scan_expanding, scan_to_csv, ScanConfig, ScanEntry};
pub use two_stage::{estimate_rupture, fit_oscillation};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Power-law divergence with exponent `m`.
    Power,
    /// Logarithmic divergence (`m` fixed at zero).
    Log,
}

/// Sign convention of the power-law exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentSign {
    /// `x^(-m)`: the trend itself diverges at `t_c`.
    #[default]
    Divergent,
    /// `x^(+m)`: finite level, divergent slope.
    Bounded,
}

/// Shape of the oscillating factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oscillation {
    /// `1 + C cos(w ln x + phi)`.
    #[default]
    Cosine,
    /// `1 + C (w ln x + phi)`, linear in `ln x`. In this form only `C w` and
    /// `C phi` are identifiable; fits report `phi = 0` (full fits) or `w = 1`
    /// (oscillation stage).
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplParams {
    pub variant: Variant,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Exponent, power variant only.
    pub m: Option<f64>,
    pub w: f64,
    pub phi: f64,
    pub t_c: f64,
    /// Time coordinate at which `x = 1`. Fits put it one observation before
    /// the first fitted point so `t = 1` at the window start.
    #[serde(default)]
    pub origin: f64,
    #[serde(default)]
    pub exponent: ExponentSign,
    #[serde(default)]
    pub oscillation: Oscillation,
}

impl LpplParams {
    pub fn log(a: f64, b: f64, c: f64, w: f64, phi: f64, t_c: f64) -> Self {
        Self {
            variant: Variant::Log,
            a,
            b,
            c,
            m: None,
            w,
            phi,
            t_c,
            origin: 0.0,
            exponent: ExponentSign::Divergent,
            oscillation: Oscillation::Cosine,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn power(a: f64, b: f64, c: f64, m: f64, w: f64, phi: f64, t_c: f64) -> Self {
        Self {
            variant: Variant::Power,
            m: Some(m),
            ..Self::log(a, b, c, w, phi, t_c)
        }
    }

    /// Checks the structural invariants (not the fit-quality ones).
    pub fn validate(&self, w_band: (f64, f64)) -> Result<()> {
        match (self.variant, self.m) {
            (Variant::Power, Some(m)) if m > 0.0 && m <= 1.0 => {}
            (Variant::Power, _) => {
                return Err(Error::Config("power variant needs m in (0, 1]".into()))
            }
            (Variant::Log, None) => {}
            (Variant::Log, Some(_)) => {
                return Err(Error::Config("log variant takes no exponent".into()))
            }
        }
        if self.c.abs() >= 1.0 {
            return Err(Error::Config(format!(
                "|C| = {} must be below 1",
                self.c.abs()
            )));
        }
        if self.oscillation == Oscillation::Cosine && (self.w < w_band.0 || self.w > w_band.1) {
            return Err(Error::Config(format!(
                "w = {} outside band [{}, {}]",
                self.w, w_band.0, w_band.1
            )));
        }
        if !(self.t_c > self.origin) {
            return Err(Error::Config("t_c must lie after the origin".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Uncertainty {
    /// Curvature of the residual-sum-of-squares profile over the `t_c` grid.
    Profile,
    /// Gauss-Newton covariance at the polished optimum.
    Jacobian,
}

/// How the oscillation stage weights its normalized residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OscWeighting {
    /// Every usable observation counts equally.
    Uniform,
    /// Weight `(B f)^2`, i.e. the residual's own noise scale; the normalized
    /// residual's variance blows up where the envelope term is small.
    Envelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Smallest candidate `t_c`, in observations beyond the window end.
    pub tc_min_offset: f64,
    /// Largest candidate offset; `None` means half the window length.
    pub tc_max_offset: Option<f64>,
    pub tc_count: usize,
    pub w_band: (f64, f64),
    pub w_count: usize,
    pub m_band: (f64, f64),
    pub m_count: usize,
    pub refine: bool,
    pub uncertainty: Uncertainty,
    /// Fewest observations a window may hold.
    pub min_obs: usize,
    pub exponent: ExponentSign,
    pub oscillation: Oscillation,
    /// `C` counts as significant when `|C| > significance * stderr(C)`.
    pub significance: f64,
    /// ... and the fitted oscillation completes at least this many cycles
    /// inside the window.
    pub min_cycles: f64,
    /// Observations with `|B f| < b_floor * max |B f|` are left out of the
    /// oscillation stage.
    pub b_floor: f64,
    pub weighting: OscWeighting,
    /// Inflate residual variances for lag-one serial correlation before
    /// computing standard errors.
    pub serial_correction: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tc_min_offset: 1.0,
            tc_max_offset: None,
            tc_count: 200,
            w_band: (2.0, 40.0),
            w_count: 120,
            m_band: (0.1, 1.0),
            m_count: 19,
            refine: true,
            uncertainty: Uncertainty::Profile,
            min_obs: 30,
            exponent: ExponentSign::Divergent,
            oscillation: Oscillation::Cosine,
            significance: 3.0,
            min_cycles: 1.0,
            b_floor: 1e-6,
            weighting: OscWeighting::Envelope,
            serial_correction: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.tc_count == 0 || self.w_count == 0 || self.m_count == 0 {
            return bad("grids must be non-empty");
        }
        if !(self.tc_min_offset > 0.0) {
            return bad("tc_min_offset must be positive");
        }
        if let Some(max) = self.tc_max_offset {
            if max < self.tc_min_offset {
                return bad("tc offsets out of order");
            }
        }
        if !(self.w_band.0 > 0.0 && self.w_band.0 <= self.w_band.1) {
            return bad("w band must be positive and ordered");
        }
        if !(self.m_band.0 > 0.0 && self.m_band.0 <= self.m_band.1 && self.m_band.1 <= 1.0) {
            return bad("m band must be ordered inside (0, 1]");
        }
        if self.min_obs < 5 {
            return bad("min_obs must be at least 5");
        }
        Ok(())
    }

    /// Residual variance `rss / dof`, inflated for serial correlation when
    /// enabled.
    pub(crate) fn residual_variance(&self, resid: &[f64], dof: usize) -> f64 {
        let rss: f64 = resid.iter().map(|r| r * r).sum();
        let base = rss / dof.max(1) as f64;
        if self.serial_correction {
            base * crate::stats::ar1_inflation(resid)
        } else {
            base
        }
    }

    pub(crate) fn tc_offsets(&self, n_obs: usize) -> Vec<f64> {
        let max = self
            .tc_max_offset
            .unwrap_or(0.5 * n_obs as f64)
            .max(self.tc_min_offset);
        crate::stats::linspace(self.tc_min_offset, max, self.tc_count)
    }
}

/// Per-parameter standard errors; `None` where the parameter is absent or
/// not identifiable at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamErrors {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub m: Option<f64>,
    pub w: Option<f64>,
    pub phi: Option<f64>,
    pub t_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Full,
    Envelope,
    Oscillation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub stage: Stage,
    pub params: LpplParams,
    pub rss: f64,
    pub sigma: f64,
    pub stderr: ParamErrors,
    pub converged: bool,
    pub n_obs: usize,
    pub tc_stderr: f64,
    /// Whether the oscillation amplitude clears the significance test.
    pub c_significant: bool,
    /// Observations dropped by the oscillation stage's envelope floor.
    pub excluded: usize,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuptureEstimate {
    pub tc_envelope: Estimate,
    pub tc_oscillation: Estimate,
    /// `|tc_env - tc_osc| <= k * sqrt(se_env^2 + se_osc^2)`.
    pub within_error_bars: bool,
    pub oscillation_significant: bool,
    /// Both of the above.
    pub agrees: bool,
    pub tc_combined: Option<Estimate>,
    pub k: f64,
    pub window: (f64, f64),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        let band = (2.0, 40.0);
        assert!(LpplParams::log(1.0, -1.0, 0.1, 8.0, 0.0, 520.0)
            .validate(band)
            .is_ok());
        assert!(LpplParams::log(1.0, -1.0, 1.2, 8.0, 0.0, 520.0)
            .validate(band)
            .is_err());
        assert!(LpplParams::log(1.0, -1.0, 0.1, 50.0, 0.0, 520.0)
            .validate(band)
            .is_err());
        assert!(LpplParams::power(1.0, 1.0, 0.1, 0.0, 8.0, 0.0, 520.0)
            .validate(band)
            .is_err());
        let mut p = LpplParams::log(1.0, -1.0, 0.1, 8.0, 0.0, 520.0);
        p.m = Some(0.5);
        assert!(p.validate(band).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            w_band: (10.0, 2.0),
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let empty = FitConfig {
            tc_count: 0,
            ..FitConfig::default()
        };
        assert!(empty.validate().is_err());
        assert_eq!(
            FitConfig::default().tc_offsets(500).last().copied(),
            Some(250.0)
        );
    }

    #[test]
    fn report_json_field_names() {
        let p = LpplParams::log(1.0, -1.0, 0.1, 8.0, 0.5, 520.0);
        let v = serde_json::to_value(p).unwrap();
        for key in ["variant", "a", "b", "c", "m", "w", "phi", "t_c"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["variant"], "log");
    }
}
