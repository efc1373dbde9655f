use thiserror::Error;

/// Errors raised by the solvers and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A result exceeded the range of `f64`.
    #[error("overflow: {0}")]
    Overflow(String),

    /// The operation needs something the model does not provide.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Inconsistent or malformed arguments (lengths, grids, configs).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Hypotheses of a theorem-backed check are not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative method failed to converge within its budget.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Too few samples to fit or estimate something.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
