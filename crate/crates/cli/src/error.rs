use std::path::PathBuf;

use homopolymer::error::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CliError {
    /// 1 for anything wrong with the request, 2 when a numerical
    /// diagnostic refused to certify the result.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                CoreError::CoarseGrid(_)
                | CoreError::Convergence(_)
                | CoreError::LowEss { .. }
                | CoreError::ChainEscaped { .. },
            ) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
