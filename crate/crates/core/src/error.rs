use thiserror::Error;

use crate::linalg::CMatrix;

pub type Result<T> = std::result::Result<T, QdsError>;

#[derive(Debug, Error)]
pub enum QdsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has {len} entries, expected {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("matrix is not Hermitian (asymmetry {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("no action supplied for matrix unit E[{row},{col}]")]
    MissingMatrixUnit { row: usize, col: usize },

    #[error("reference vector must have unit norm, got {norm}")]
    NonUnitVector { norm: f64 },

    #[error("form equality violated: residual {residual:.3e} exceeds {bound:.3e}")]
    FormEquality { residual: f64, bound: f64 },

    #[error("operator M is not accretive: min eigenvalue of M + M^dagger is {min_eigenvalue:.3e}")]
    NotAccretive { min_eigenvalue: f64 },

    #[error("generator does not annihilate the trace: max residual {residual:.3e}")]
    NotTraceAnnihilating { residual: f64 },

    #[error("generator is not conditionally completely positive: min compressed Choi eigenvalue {min_eigenvalue:.3e}")]
    NotConditionallyCp {
        min_eigenvalue: f64,
        witness: CMatrix,
    },

    #[error("map is not completely positive: min eigenvalue {min_eigenvalue:.3e}")]
    NotCompletelyPositive {
        min_eigenvalue: f64,
        witness: Option<CMatrix>,
    },

    #[error("negative pivot {pivot:.3e} at position {index} in Cholesky recursion")]
    NegativePivot { index: usize, pivot: f64 },

    #[error("round trip mismatch: rebuilt generator differs by {residual:.3e} (relative)")]
    RoundTrip { residual: f64 },

    #[error("negative time {0}: semigroups only evolve forward")]
    NegativeTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
