use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] forestmmd::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 2 for bad input or flags, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use forestmmd::Error as E;
        match self {
            CliError::Usage(_) | CliError::Data { .. } => 2,
            CliError::Core(
                E::InvalidDataset(_)
                | E::InvalidParameter(_)
                | E::Infeasible(_)
                | E::UnknownModel(_)
                | E::DimensionMismatch { .. }
                | E::LengthMismatch(..),
            ) => 2,
            CliError::Core(E::EmptyNode | E::Singular(_)) => 1,
            CliError::Write { .. } | CliError::Internal(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
