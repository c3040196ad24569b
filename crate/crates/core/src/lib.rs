//! Diagnostics for economic and financial time series.
//!
//! - [`dfa`]: detrended fluctuation analysis, whole-series and moving-window.
//! - [`lppl`]: log-periodic rupture fitting, single- and two-stage, plus an
//!   expanding-window monitor.
//! - [`zipf`]: rank-frequency analysis of sign-coded returns.
//! - [`comove`]: correlation distances, their rolling mean and clustering.
//! - [`synth`]: seeded test signals.

pub mod comove;
pub mod dfa;
mod error;
pub mod lm;
pub mod lppl;
pub mod series;
pub mod stats;
pub mod synth;
pub mod zipf;

pub use error::{Error, Result};
