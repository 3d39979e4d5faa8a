use std::path::PathBuf;

use zk_core::ZkError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] ZkError),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        AppError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 validation, 3 numerical failure, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if e.is_numerical() => 3,
            AppError::Core(_) | AppError::Config(_) | AppError::Format { .. } => 2,
            AppError::Io { .. } => 4,
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
