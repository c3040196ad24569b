use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "econodiag",
    version,
    about = "Time-series diagnostics: DFA, log-periodic fits, Zipf ranking, comovement"
)]
pub struct Cli {
    /// Worker threads for grid and window evaluation (outputs do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON file with option values (keys are option names with `_`); a run
    /// manifest works too. Flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detrended fluctuation analysis, whole series and moving window.
    Dfa(DfaArgs),
    /// Log-periodic rupture fits.
    #[command(subcommand)]
    Lppl(LpplCommand),
    /// Zipf ranking of sign-coded returns.
    Zipf(ZipfArgs),
    /// Correlation-distance comovement over a panel.
    Comove(ComoveArgs),
    /// Seeded synthetic series.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand, Debug)]
pub enum LpplCommand {
    /// One window: full fit plus the two-stage estimate.
    Fit(LpplFitArgs),
    /// Expanding windows with warnings.
    Scan(LpplScanArgs),
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    White(NoiseArgs),
    Brownian(NoiseArgs),
    Lppl(SynthLpplArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InputArgs {
    /// CSV file with one series.
    #[arg(long)]
    pub input: PathBuf,
    /// Time column (header name or 0-based index).
    #[arg(long, default_value = "0")]
    pub time_column: String,
    /// Value column; defaults to `value` when the header has it, else column 1.
    #[arg(long)]
    pub value_column: Option<String>,
    /// ISO date column carried as labels; defaults to `date` when present.
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, value_enum, default_value_t = TimeFormatArg::Index)]
    pub time_format: TimeFormatArg,
    /// Fail on the first bad row instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormatArg {
    Iso,
    Index,
}

/// Preprocessing before DFA and Zipf coding.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// Returns pass through; levels become log returns.
    Auto,
    None,
    Log,
    Returns,
    LogReturns,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OutArgs {
    /// Directory for results and the run manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DfaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    #[arg(long, value_enum, default_value_t = Transform::Auto)]
    pub transform: Transform,
    /// Moving-window length; omit for a whole-series run only.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, default_value_t = 4)]
    pub min_box: usize,
    #[arg(long, default_value_t = 0.25)]
    pub max_box_fraction: f64,
    #[arg(long, default_value_t = 16)]
    pub n_boxes: usize,
    #[arg(long, default_value_t = 1)]
    pub detrend_order: usize,
    /// Only forward boxes (drop the tail remainder).
    #[arg(long)]
    pub forward_only: bool,
    /// Smallest box size used in the slope fit.
    #[arg(long)]
    pub fit_min: Option<usize>,
    /// Largest box size used in the slope fit.
    #[arg(long)]
    pub fit_max: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Power,
    Log,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitTransform {
    Log,
    Level,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyArg {
    Profile,
    Jacobian,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentArg {
    Divergent,
    Bounded,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    Envelope,
    Uniform,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Log)]
    pub variant: VariantArg,
    /// Fit the log of the series or its raw level.
    #[arg(long, value_enum, default_value_t = FitTransform::Log)]
    pub transform: FitTransform,
    /// First time coordinate or ISO date of the fitting window.
    #[arg(long)]
    pub from: Option<String>,
    /// Last time coordinate or ISO date of the fitting window.
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub tc_min_offset: f64,
    /// Defaults to half the window length.
    #[arg(long)]
    pub tc_max_offset: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub tc_count: usize,
    #[arg(long, default_value_t = 2.0)]
    pub w_min: f64,
    #[arg(long, default_value_t = 40.0)]
    pub w_max: f64,
    #[arg(long, default_value_t = 120)]
    pub w_count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub m_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m_max: f64,
    #[arg(long, default_value_t = 19)]
    pub m_count: usize,
    /// Skip the local polish after the grid search.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long, value_enum, default_value_t = UncertaintyArg::Profile)]
    pub uncertainty: UncertaintyArg,
    #[arg(long, default_value_t = 30)]
    pub min_obs: usize,
    #[arg(long, value_enum, default_value_t = ExponentArg::Divergent)]
    pub exponent: ExponentArg,
    /// Use the oscillation term exactly as printed, 1 + C (w ln x + phi),
    /// instead of the cosine.
    #[arg(long)]
    pub linear_lpo: bool,
    #[arg(long, default_value_t = 3.0)]
    pub significance: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_cycles: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub b_floor: f64,
    #[arg(long, value_enum, default_value_t = WeightingArg::Envelope)]
    pub weighting: WeightingArg,
    /// Treat residuals as independent when computing standard errors.
    #[arg(long)]
    pub no_serial_correction: bool,
    /// Agreement multiplier on the combined standard error.
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LpplFitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LpplScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 250)]
    pub first_window: usize,
    #[arg(long, default_value_t = 20)]
    pub step: usize,
    /// Largest combined t_c standard error that may warn.
    #[arg(long, default_value_t = 10.0)]
    pub precision: f64,
    /// Largest distance of t_c past the window end that may warn.
    #[arg(long, default_value_t = 60.0)]
    pub horizon: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphabetArg {
    Binary,
    Ternary,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ZipfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    #[arg(long, value_enum, default_value_t = Transform::Auto)]
    pub transform: Transform,
    /// Word length.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = AlphabetArg::Binary)]
    pub alphabet: AlphabetArg,
    /// Half-width of the flat band for the ternary alphabet.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Count back-to-back blocks instead of every start position.
    #[arg(long)]
    pub disjoint: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkageArg {
    Single,
    Average,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ComoveArgs {
    /// Member series, one CSV each (repeat the flag).
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = "0")]
    pub time_column: String,
    #[arg(long)]
    pub value_column: Option<String>,
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, value_enum, default_value_t = TimeFormatArg::Index)]
    pub time_format: TimeFormatArg,
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    /// Observations per window.
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Correlate raw levels instead of log growth rates. Trending levels
    /// produce spurious correlations.
    #[arg(long)]
    pub levels: bool,
    #[arg(long, value_enum, default_value_t = LinkageArg::Single)]
    pub linkage: LinkageArg,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct NoiseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    #[arg(long)]
    pub n: usize,
    /// Required: there is no implicit seed.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SynthLpplArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Log)]
    pub variant: VariantArg,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    /// Exponent, power variant only.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub w: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    #[arg(long)]
    pub tc: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = ExponentArg::Divergent)]
    pub exponent: ExponentArg,
    #[arg(long)]
    pub linear_lpo: bool,
}
