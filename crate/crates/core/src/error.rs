use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("non-finite sample in channel `{channel}` at index {index}")]
    NonFiniteSample { channel: String, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("cannot resample from {from_hz} Hz up to {to_hz} Hz (downsampling only)")]
    UnsupportedUpsample { from_hz: f64, to_hz: f64 },

    #[error("degenerate marginals: chance agreement is 1 but observed agreement is {observed}")]
    DegenerateMarginals { observed: f64 },

    #[error("degenerate amplitude: signal is identically zero")]
    DegenerateAmplitude,

    #[error("sample-size error: {0}")]
    SampleSize(String),

    #[error("class coverage error: {0}")]
    ClassCoverage(String),

    #[error("shape error: expected {expected} features, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("undefined curve: {0}")]
    UndefinedCurve(String),

    #[error("insufficient pairs: {nonzero} non-zero differences (need at least {required})")]
    InsufficientPairs { nonzero: usize, required: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
