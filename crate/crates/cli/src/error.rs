//! CLI error taxonomy mapped to exit codes: 1 usage, 2 data, 3 numeric.

use pcsod_core::checkpoint::CheckpointError;
use pcsod_core::metrics::MetricsError;
use pcsod_core::model::{ConfigError, ModelError};
use pcsod_core::train::TrainError;
use pcsod_core::view::ViewError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, malformed config keys, invalid recipes.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed data: files, datasets, checkpoints.
    #[error("{0}")]
    Data(String),
    /// A numeric check failed (gradient check, non-finite loss).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ViewError> for CliError {
    fn from(e: ViewError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}
