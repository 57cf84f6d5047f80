use thiserror::Error;

/// Errors raised by the estimation, simulation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not skew-symmetric (max deviation {deviation:e})")]
    NotSkew { deviation: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigenvalues are not sorted in non-increasing order at index {index}")]
    Unsorted { index: usize },

    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: String,
        expected: String,
    },

    #[error("zero observation(s) at 0-based row index(es) {rows:?}: angle undefined")]
    ZeroRows { rows: Vec<usize> },

    #[error("zero vector has no angle")]
    ZeroVector,

    #[error("degenerate split: lambda_p - lambda_(p+1) = {gap:e} at p = {p}")]
    DegenerateSplit { p: usize, gap: f64 },

    #[error("p = {p} is not an eigenvalue cluster boundary (boundaries {boundaries:?})")]
    NotClusterBoundary { p: usize, boundaries: Vec<usize> },

    #[error("matrix is outside the required class: {0}")]
    NotInClass(String),

    #[error("projection invariant violated: {0}")]
    InvalidProjection(String),

    #[error("column {col} is constant; ranks are undefined")]
    ConstantColumn { col: usize },

    #[error("denominator vanishes in {0}")]
    ZeroDenominator(&'static str),

    #[error("all projected observations vanish")]
    AllProjectionsVanish,

    #[error("too few exceedances: {count} (need at least {needed})")]
    TooFewExceedances { count: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range(
    name: &'static str,
    value: impl ToString,
    expected: impl ToString,
) -> Error {
    Error::OutOfRange {
        name,
        value: value.to_string(),
        expected: expected.to_string(),
    }
}
