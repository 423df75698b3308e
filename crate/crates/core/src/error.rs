use thiserror::Error;

/// Errors raised by grid, valuation and measure operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}; only 2 and 3 are available")]
    UnsupportedDimension(usize),

    #[error("N < 2: a grid needs at least two directions, got {0}")]
    TooFewPoints(usize),

    #[error("index {index} out of range for grid of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("operands live on different direction grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("radial function value {value} at index {index} is negative or not finite")]
    InvalidValue { index: usize, value: f64 },

    #[error("cells do not partition the grid: {0}")]
    NotAPartition(String),

    #[error("value {value} lies outside the kernel level range [0, {max}]")]
    OutOfKernelRange { value: f64, max: f64 },

    #[error("malformed kernel: {0}")]
    MalformedKernel(String),

    #[error("operation requires a centered valuation (V(0) = 0), got V(0) = {0}")]
    NotCentered(f64),

    #[error("operation requires a valuation flagged positive: {0}")]
    NotPositive(String),

    #[error("operation `{op}` is unsupported for black-box valuation `{valuation}`")]
    Unsupported { op: &'static str, valuation: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large for exhaustive enumeration: {0} lattice points")]
    TooLarge(u128),

    #[error("absolute continuity violated at index {0}: nu charges a mu-null direction")]
    NotAbsolutelyContinuous(usize),

    #[error("degenerate control measure: every term vanished")]
    DegenerateMeasure,

    #[error("extension did not converge within {0} halvings")]
    NoConvergence(usize),

    #[error("evaluation budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
