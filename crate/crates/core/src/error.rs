use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty node")]
    EmptyNode,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible subsample sizes: {0}")]
    Infeasible(String),

    #[error("singular kernel system: {0}")]
    Singular(String),

    #[error("unknown model {0} (expected 1..=6)")]
    UnknownModel(u32),
}

pub type Result<T> = std::result::Result<T, Error>;
