use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot normalize the all-zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("invalid effect operator: {0}")]
    InvalidEffect(String),
    #[error("invalid ensemble weights: {0}")]
    InvalidWeights(String),
    #[error("threshold out of range: {0}")]
    InvalidThreshold(String),
    #[error("search space too large: {size} > {limit}")]
    TooLarge { size: f64, limit: f64 },
    #[error("index {index} out of range (len {len})")]
    BadIndex { index: usize, len: usize },
    #[error("assignment out of range: {0}")]
    BadAssignment(String),
    #[error("degenerate constants: {0}")]
    DegenerateConstants(String),
    #[error("no feasible constants: {0}")]
    Infeasible(String),
    #[error("bound hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error("objective returned a non-finite value")]
    ObjectiveError,
    #[error("inconsistent parameters: {0}")]
    Inconsistent(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}
