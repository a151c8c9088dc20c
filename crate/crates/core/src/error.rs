use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Geometric input failed validation (degenerate, intersecting, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A quadrature error estimate exceeded the configured tolerance.
    #[error("convergence error at {location}: error estimate {err_estimate:e} exceeds tolerance {tolerance:e}")]
    Convergence {
        location: String,
        err_estimate: f64,
        tolerance: f64,
    },

    /// The closed-form coupling flow hits its pole.
    #[error("coupling flow pole: denominator {denominator:e} <= 0 (critical scale factor {critical_tau:e})")]
    FlowPole { denominator: f64, critical_tau: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
