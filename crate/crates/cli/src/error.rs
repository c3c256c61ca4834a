use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] relu_regions::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(relu_regions::Error::Config(_)) => 2,
            CliError::Io { .. } => 3,
            CliError::Data { .. } | CliError::Csv(_) => 4,
            CliError::Core(relu_regions::Error::BudgetExceeded { .. }) => 6,
            CliError::Core(_) => 5,
        }
    }

    pub(crate) fn data(path: &std::path::Path, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
