use thiserror::Error;

/// Errors raised by detection, event construction and the tests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series must contain at least 2 values, got {0}")]
    SeriesTooShort(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("chromosome label `{label}` reappears at index {index} after a different label")]
    ChromNotContiguous { label: alloc::string::String, index: usize },
    #[error("changepoint index {j} out of range 1..={k}")]
    IndexOutOfRange { j: usize, k: usize },
    #[error("duplicate changepoint location {0}")]
    DuplicateLocation(usize),
    #[error("location {location} outside 1..={max}")]
    LocationOutOfRange { location: usize, max: usize },
    #[error("invalid indices: {0}")]
    InvalidIndices(&'static str),
    #[error("no admissible split left at step {step}")]
    NoAdmissibleSplit { step: usize },
    #[error("fused lasso path has no further knot at step {step}")]
    PathEnded { step: usize },
    #[error("model is not valid for this operation: {0}")]
    ModelMismatch(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observed data violate constraint row {row} (slack {slack:e})")]
    Infeasible { row: usize, slack: f64 },
    #[error("empty truncation interval")]
    EmptyTruncation,
    #[error("all {draws} importance draws carry zero selection mass")]
    ZeroMass { draws: usize },
    #[error("non-positive residual degrees of freedom")]
    NoDegreesOfFreedom,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("information criterion did not stop within {0} steps")]
    IcNeverStopped(usize),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("t-test needs at least 2 points on each side")]
    SegmentTooShort,
}

pub type Result<T> = core::result::Result<T, Error>;
