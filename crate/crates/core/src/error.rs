use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),
    #[error("erasure probability {0} outside (0, 1)")]
    InvalidEpsilon(f64),
    #[error("convergence factor alpha = {0} outside (0, 1]")]
    InvalidAlpha(f64),
    #[error("maximum variable degree must be at least 2, got {0}")]
    InvalidMaxDegree(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("trace too short: need at least 2 values, got {0}")]
    TraceTooShort(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
