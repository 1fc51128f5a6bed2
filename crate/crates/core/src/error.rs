use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents (bad magic, truncated payload, missing header fields).
    #[error("{path}: format error: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Well-formed file using a feature this crate does not handle (e.g. an audio codec).
    #[error("{path}: unsupported: {reason}")]
    Unsupported { path: PathBuf, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Text-format validation failure, reported with a 1-based line number.
    #[error("{path}:{line}: {reason}")]
    Validation {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Training data that cannot constrain the model (e.g. a single class).
    #[error("degenerate training data: {0}")]
    Degenerate(String),

    /// Metric requested on data where it is not defined (e.g. ROC with one class).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Operating-point target that no threshold on the curve can reach.
    /// Carries the best value the curve does achieve.
    #[error("unattainable target for {criterion}: best achievable is {best_achievable:.4}")]
    UnattainableTarget {
        criterion: String,
        best_achievable: f64,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
