use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative solver ran out of budget. `history` holds the residual
    /// after each accepted stage (may be empty).
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// A root or maximum could not be bracketed.
    #[error("bracket failure: {0}")]
    BracketFailure(String),

    /// Closed-form and variational complexity disagree.
    #[error("closed-form and variational paths disagree: |d tot| = {tot:.3e}, |d min| = {min:.3e}")]
    PathDisagreement { tot: f64, min: f64 },

    /// A grid or window is too coarse to support the requested computation.
    #[error("resolution: {0}")]
    Resolution(String),
}

impl AtlasError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AtlasError::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, AtlasError>;
