use thiserror::Error;

/// Errors raised by the analytical models and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("row {row} of the transition matrix sums to {sum} (expected 1)")]
    NotStochastic { row: usize, sum: f64 },

    #[error("entry ({row}, {col}) = {value} is not a probability")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("transition matrix must be square and non-empty")]
    NotSquare,

    #[error("transition matrix is not irreducible")]
    Reducible,

    #[error("stationary distribution did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

impl ModelError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter { field, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
