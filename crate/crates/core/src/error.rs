use std::path::PathBuf;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("symmetric eigensolver did not converge within {0} sweeps")]
    ConvergenceFailure(usize),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid decay rate {0}: must lie in (0, 1)")]
    InvalidDecay(f64),

    #[error("invalid probability {0}: must lie in (0, 1)")]
    InvalidProbability(f64),

    #[error("invalid sparsity s = {s} for sketch size m = {m}")]
    InvalidSparsity { s: usize, m: usize },

    #[error("sketch size {m} exceeds the padded row count {max}")]
    SketchTooLarge { m: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative quadratic form {0:e}: preconditioner factorization is broken")]
    NegativeValue(f64),

    #[error("conjugate gradient breakdown at iteration {iteration}: curvature {curvature:e}")]
    BreakdownDetected { iteration: usize, curvature: f64 },

    #[error("malformed CSV at row {row}: expected {expected} fields, found {found}")]
    MalformedCsv {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric field {value:?} at row {row}, column {col}")]
    NonNumericField {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("bad matrix file {path}: {reason}")]
    BadMatrixFile { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(op: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
