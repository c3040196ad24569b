use thiserror::Error;

/// Errors raised by every analysis in the crate.
///
/// Input problems (bad files, invariant violations on construction) are kept
/// apart from analysis failures so front ends can map them to different exit
/// codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("no parseable rows in input")]
    NoRows,
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate time coordinate {0}")]
    DuplicateTime(String),
    #[error("series too short: {len} observations, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("times must be strictly increasing (position {0})")]
    NotIncreasing(usize),
    #[error("non-positive value {value} at position {index}")]
    NonPositive { index: usize, value: f64 },
    #[error("zero value at position {0}")]
    ZeroDivision(usize),
    #[error("wrong series kind: expected {expected}, found {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("time {t} is outside the model domain (t_c = {tc})")]
    Domain { t: f64, tc: f64 },
    #[error("rank-deficient design matrix")]
    RankDeficient,
    #[error("every grid cell is degenerate")]
    AllCellsDegenerate,
    #[error("not enough usable points: {got}, need {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("fit report is not converged")]
    NotConverged,
    #[error("distance matrix has masked entries")]
    Masked,
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed input rather than by the analysis.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput
                | Error::NoRows
                | Error::MissingColumn(_)
                | Error::Parse { .. }
                | Error::DuplicateTime(_)
                | Error::NonFinite(_)
                | Error::NotIncreasing(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
