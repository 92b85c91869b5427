use thiserror::Error;

/// Errors raised by the discretization, the solvers and the experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate {x} lies outside the domain [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },

    #[error("evaluation failure: {0}")]
    EvaluationFailure(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("linear solve failed: {reason} (condition estimate {condition_estimate:.3e})")]
    LinearSolve {
        reason: String,
        condition_estimate: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, actual })
    }
}
