use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A reduced section failed the flatness test; carries the worst plaquette.
    #[error("holonomy defect {defect:e} at plaquette ({i}, {j})")]
    Holonomy { i: usize, j: usize, defect: f64 },

    /// Two sweep paths produced different multipliers on the same face.
    #[error("multiplier recovery conflict at face ({i}, {j}): discrepancy {discrepancy:e}")]
    RecoveryConflict { i: usize, j: usize, discrepancy: f64 },

    #[error("solver did not converge in {iterations} iterations (gradient norm {gradient_norm:e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        history: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
