use std::fmt;

use coughep_core::Error as CoreError;

/// Anything that can stop a pipeline run; carries a stable machine-readable
/// kind for the JSON error channel.
#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    /// Bad invocation discovered after argument parsing (missing artifacts,
    /// refused split, unknown threshold name, ...).
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                CoreError::Io { .. } => "io",
                CoreError::Format { .. } => "format",
                CoreError::Unsupported { .. } => "unsupported",
                CoreError::EmptyInput(_) => "empty_input",
                CoreError::Validation { .. } => "validation",
                CoreError::InvalidConfig(_) => "invalid_config",
                CoreError::Shape(_) => "shape",
                CoreError::Degenerate(_) => "degenerate",
                CoreError::UndefinedMetric(_) => "undefined_metric",
                CoreError::UnattainableTarget { .. } => "unattainable_target",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Core(e) => Some(e),
            CliError::Usage(_) => None,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}
