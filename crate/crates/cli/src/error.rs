use std::fmt;

use sinusbench::cohort::CohortError;
use sinusbench::metrics::MetricsError;
use sinusbench::models::ModelError;
use sinusbench::protocol::ProtocolError;
use sinusbench::rag::RagError;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input, configuration or file state (exit 2).
    Validation(String),
    /// A post-operative field reached the feature set (exit 3).
    Leakage(String),
    /// A replay store had no answer for a prompt (exit 4).
    ReplayMiss(String),
    /// Training or a statistic failed numerically (exit 5).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Leakage(_) => 3,
            CliError::ReplayMiss(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Leakage(m) => write!(f, "leakage: {m}"),
            CliError::ReplayMiss(m) => write!(f, "replay miss: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        match e {
            CohortError::Leakage(v) => CliError::Leakage(v.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Leakage(v) => CliError::Leakage(v.to_string()),
            ModelError::Diverged { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::ReplayMiss { .. } => CliError::ReplayMiss(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::RedrawCapExceeded { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<RagError> for CliError {
    fn from(e: RagError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
