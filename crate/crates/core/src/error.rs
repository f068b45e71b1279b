use alloc::string::String;
use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {point} is outside the sample space of size {size}")]
    PointOutOfRange { point: usize, size: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point subset must be nonempty")]
    EmptySubset,

    #[error("point {0} is not in the active set")]
    NotActive(usize),

    #[error("point {0} has an empty neighborhood")]
    EmptyNeighborhood(usize),

    #[error("log f queried at point {0} outside the available support")]
    OutsideSupport(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sample space of size {size} exceeds the enumeration limit {limit}")]
    SpaceTooLarge { size: usize, limit: usize },

    #[error("divergence {value:e} is negative beyond tolerance; gradient inconsistency")]
    NegativeDivergence { value: f64 },

    #[error("non-finite objective at sample {sample} (iteration {iteration})")]
    NonFiniteObjective { sample: usize, iteration: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;
