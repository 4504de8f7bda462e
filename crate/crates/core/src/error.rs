use thiserror::Error;

/// Errors raised by configuration, design and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("matrix is not Hermitian positive semidefinite: {0}")]
    NotPsd(String),

    #[error("matrix is not block diagonal: {0}")]
    NotBlockDiagonal(String),

    #[error("memory cap exceeded: {requested} entries requested, cap is {cap}")]
    MemoryCap { requested: usize, cap: usize },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("iteration cap of {0} exceeded")]
    IterationCap(usize),

    #[error("bit budget of {budget} bits is below one bit per real sample ({required} required)")]
    BudgetTooSmall { budget: u64, required: u64 },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("bundle format error: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
