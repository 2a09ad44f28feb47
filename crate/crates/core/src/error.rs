use thiserror::Error;

/// Errors raised by the discretization and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A geometric construction (symmetric point, detector pair) does not
    /// exist for the requested index.
    #[error("not available: {0}")]
    NotAvailable(String),

    #[error("linear solver failure: {reason} (relative residual {residual:e})")]
    SolverFailure { reason: String, residual: f64 },

    #[error("nonlinear iteration did not converge in {iterations} iterations (last relative update {last_update:e})")]
    NonConvergence {
        iterations: usize,
        last_update: f64,
        history: Vec<crate::nonlinear::IterationRecord>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
