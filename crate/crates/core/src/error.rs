//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time series is empty")]
    EmptySeries,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("missing value at index {index}")]
    MissingValue { index: usize },

    #[error("label vector has length {labels}, expected {values}")]
    LabelLength { values: usize, labels: usize },

    #[error("window size {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("window size must be at least 1")]
    ZeroWindow,

    #[error("series of length {len} is too short, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not orthonormal (max |UᵀU - I| = {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("kept-row submatrix is rank deficient (min |R_ii| = {min_pivot:e})")]
    RankDeficient { min_pivot: f64 },

    #[error("corruption budget {n_s} plus rank {rank} exceeds window size {window}")]
    BadBudget { n_s: usize, rank: usize, window: usize },

    #[error("l1 fit did not converge after {iterations} iterations")]
    DidNotConverge { last_iterate: Vec<f64>, iterations: usize },

    #[error("singular spectrum is identically zero")]
    AllZeroSpectrum,

    #[error("every trajectory column would be dropped")]
    AllColumnsDropped,

    #[error("detector has not been trained")]
    NotTrained,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot place {runs} non-overlapping runs of length {run_length} in {available} stamps")]
    CannotPlace { runs: usize, run_length: usize, available: usize },

    #[error("no positive labels in the evaluated region")]
    NoPositives,

    #[error("unsupported model version {0}")]
    UnsupportedVersion(u32),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("json error: {0}")]
    Json(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
