use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A composite space would exceed the configured total-dimension cap.
    #[error("capacity exceeded: total dimension {requested} > cap {cap}")]
    Capacity { requested: usize, cap: usize },

    /// An argument was out of range or shapes did not match.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A heralded operation or projection had (numerically) zero probability.
    #[error("null outcome in {operation}: probability {prob:e}")]
    NullOutcome { operation: &'static str, prob: f64 },

    /// A quadrature failed its refinement check.
    #[error("quadrature did not converge in {what}: {coarse} vs {fine}")]
    Quadrature {
        what: &'static str,
        coarse: f64,
        fine: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
