//! Expanding-window monitoring: refit both stages as data accumulates and
//! raise a warning when they agree on a precise, imminent rupture time.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_rupture, fit_envelope, fit_oscillation, FitConfig, RuptureEstimate, Variant};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub fit: FitConfig,
    pub variant: Variant,
    /// Observations in the first window.
    pub first_window: usize,
    /// Observations added per step.
    pub step: usize,
    /// Agreement multiplier on the combined standard error.
    pub k: f64,
    /// Largest combined `t_c` standard error (observations) that may warn.
    pub precision: f64,
    /// Warn only when the combined `t_c` falls at most this many
    /// observations after the window end and neither stage's own `t_c`
    /// standard error exceeds it.
    pub horizon: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            variant: Variant::Log,
            first_window: 250,
            step: 20,
            k: 2.0,
            precision: 10.0,
            horizon: 60.0,
        }
    }
}

/// One window of a scan. Failed fits leave `estimate` empty and say why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub window_end: f64,
    pub estimate: Option<RuptureEstimate>,
    pub error: Option<String>,
    pub warning: bool,
}

fn run_window(s: &TimeSeries, cfg: &ScanConfig) -> Result<RuptureEstimate> {
    let env = fit_envelope(s, cfg.variant, &cfg.fit)?;
    let osc = fit_oscillation(s, &env, &cfg.fit)?;
    estimate_rupture(&env, &osc, cfg.k)
}

/// Each stage must localize `t_c` to within the horizon on its own:
/// agreement with a stage whose error bar spans the whole grid carries no
/// information.
fn is_warning(est: &RuptureEstimate, window_end: f64, cfg: &ScanConfig) -> bool {
    match (est.agrees, est.tc_combined) {
        (true, Some(c)) => {
            c.stderr < cfg.precision
                && est.tc_envelope.stderr <= cfg.horizon
                && est.tc_oscillation.stderr <= cfg.horizon
                && c.value - window_end <= cfg.horizon
        }
        _ => false,
    }
}

/// Fits windows `[0, first_window + j * step)` for `j = 0, 1, ...` while they
/// fit inside the series.
pub fn scan_expanding(s: &TimeSeries, cfg: &ScanConfig) -> Result<Vec<ScanEntry>> {
    cfg.fit.validate()?;
    if cfg.step == 0 {
        return Err(Error::Config("step must be at least 1".into()));
    }
    if cfg.first_window < cfg.fit.min_obs {
        return Err(Error::Config(format!(
            "first window {} is below the fit floor {}",
            cfg.first_window, cfg.fit.min_obs
        )));
    }
    if cfg.first_window > s.len() {
        return Err(Error::TooShort {
            len: s.len(),
            min: cfg.first_window,
        });
    }
    let ends: Vec<usize> = (cfg.first_window..=s.len()).step_by(cfg.step).collect();
    ends.par_iter()
        .map(|&end| {
            let win = s.slice(0..end)?;
            let window_end = win.last_time();
            Ok(match run_window(&win, cfg) {
                Ok(est) => ScanEntry {
                    window_end,
                    warning: is_warning(&est, window_end, cfg),
                    estimate: Some(est),
                    error: None,
                },
                Err(e) => ScanEntry {
                    window_end,
                    estimate: None,
                    error: Some(e.to_string()),
                    warning: false,
                },
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// `window_end,tc_env,tc_env_err,tc_osc,tc_osc_err,agrees,tc_combined,warning`
pub fn scan_to_csv(entries: &[ScanEntry]) -> String {
    let mut out =
        String::from("window_end,tc_env,tc_env_err,tc_osc,tc_osc_err,agrees,tc_combined,warning\n");
    for e in entries {
        let est = e.estimate.as_ref();
        let _ = writeln!(
            out,
            "{:?},{},{},{},{},{},{},{}",
            e.window_end,
            opt(est.map(|r| r.tc_envelope.value)),
            opt(est.map(|r| r.tc_envelope.stderr)),
            opt(est.map(|r| r.tc_oscillation.value)),
            opt(est.map(|r| r.tc_oscillation.stderr)),
            est.map(|r| r.agrees.to_string()).unwrap_or_default(),
            opt(est.and_then(|r| r.tc_combined.map(|c| c.value))),
            e.warning,
        );
    }
    out
}
