use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("angle {0} rad is outside the open interval (0, pi)")]
    AngleOutOfRange(f64),

    #[error("noise variance at sensor {index} must be positive, got {value}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian positive definite")]
    NotPositiveDefinite,

    #[error("Fisher information is singular: {0}")]
    Unidentifiable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
