use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] gnc_core::Error),
}

impl LabError {
    pub fn config(message: impl Into<String>) -> Self {
        LabError::Config(message.into())
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        LabError::Numeric(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 3 for numeric failures, 2 for configuration and
    /// input/output problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Numeric(_) | LabError::Core(gnc_core::Error::Precondition(_)) => 3,
            _ => 2,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
