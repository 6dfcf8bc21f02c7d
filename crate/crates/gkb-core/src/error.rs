use thiserror::Error;

/// Errors shared across the solver stack.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("operator not positive definite: x'Ax = {value:e} for |x|^2 = {norm_sq:e}")]
    NotPositiveDefinite { value: f64, norm_sq: f64 },

    #[error("matrix not positive definite at row {row} (pivot {pivot:e})")]
    NonPositivePivot { row: usize, pivot: f64 },

    #[error("matrix not symmetric: |A[{row},{col}] - A[{col},{row}]| = {deviation:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("zero or negative diagonal entry at rows {0:?}")]
    BadDiagonal(Vec<usize>),

    #[error("inner solver failed: {0}")]
    InnerSolver(String),

    #[error(
        "explicit augmented matrix would store about {estimate} entries (cap {cap}); \
         use the operator form instead"
    )]
    AugmentTooDense { estimate: usize, cap: usize },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
