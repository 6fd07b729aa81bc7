//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (supported range is {1})")]
    UnsupportedDimension(usize, &'static str),

    #[error("point {0:?} is outside the chart domain")]
    OutsideDomain(Vec<f64>),

    #[error("matrix is not positive-definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("degenerate velocity: V.V = {0}")]
    DegenerateVelocity(f64),

    #[error("C-form constraint violated at construction: |U.U - 1| = {unit_defect}, |C.U| = {ortho_defect}")]
    ConstraintViolation { unit_defect: f64, ortho_defect: f64 },

    #[error("parameter pole: the curve is undefined at tau = {0}")]
    ParameterPole(f64),

    #[error("degenerate straight line: beta = 0 has no circle geometry")]
    DegenerateLine,

    #[error("no finite limit: beta = 0 escapes every compact set")]
    NoFiniteLimit,

    #[error("alpha = {0} is out of range [0, 2)")]
    AlphaOutOfRange(f64),

    #[error("Moebius map has a pole at parameter {0}")]
    MobiusPole(f64),

    #[error("singular Moebius coefficients: a*d - b*c = 0")]
    MobiusSingular,

    #[error("sphere point is at or within {margin} of the projection pole")]
    AtProjectionPole { margin: f64 },

    #[error("conformal factor must be positive, got {omega} at {point:?}")]
    NonPositiveOmega { omega: f64, point: Vec<f64> },

    #[error("non-finite component in input")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
