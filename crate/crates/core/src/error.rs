use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix exponential overflow (1-norm {norm:e})")]
    Overflow { norm: f64 },

    #[error("invalid Pauli label `{0}`")]
    InvalidPauli(char),

    #[error("expansion order {order} exceeds maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("operator `{0}` is not Hermitian")]
    NotHermitian(String),

    #[error("time-dependent errors are not supported by the universal estimator")]
    TimeDependentUniversal,

    #[error("solution file: {0}")]
    Solution(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
