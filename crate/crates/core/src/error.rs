use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is singular or not positive definite")]
    Singular,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("vectors do not span R^{dim} (rank {rank})")]
    RankDeficient { dim: usize, rank: usize },

    #[error("not a decomposition of the identity: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotDecomposition { residual: f64, tol: f64 },

    #[error("contact points cannot support the identity: residual {residual:.3e}")]
    DegenerateContacts { residual: f64 },

    #[error("operator norm {norm:.6} exceeds 1")]
    OperatorNorm { norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
