//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LevisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("LP solver stalled after {0} pivots")]
    LpStalled(usize),

    #[error("branch-and-bound node limit ({0}) exceeded")]
    NodeLimit(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, LevisError>;
