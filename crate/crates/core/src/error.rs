use std::path::PathBuf;

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate point: rows {first} and {second} are identical")]
    DuplicatePoint { first: usize, second: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("decomposition failed to converge: {0}")]
    NoConvergence(String),

    #[error("dense covariance of {n} candidates exceeds the cap of {cap}")]
    MemoryCap { n: usize, cap: usize },

    #[error("{subsets} subsets exceed the brute-force budget of {budget}")]
    CombinatorialBudget { subsets: u128, budget: u128 },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable tag used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::DuplicatePoint { .. } => "duplicate_point",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::RankDeficient(_) => "rank_deficient",
            Error::NoConvergence(_) => "no_convergence",
            Error::MemoryCap { .. } => "memory_cap",
            Error::CombinatorialBudget { .. } => "combinatorial_budget",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
