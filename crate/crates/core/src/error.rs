use thiserror::Error;

/// Validation and numerical errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("Kraus operators are not trace preserving (residual norm {0:e})")]
    NotTracePreserving(f64),

    #[error("Choi matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotCompletelyPositive(f64),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid stochastic matrix: {0}")]
    NotStochastic(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("empty input set: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;
