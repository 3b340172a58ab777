use thiserror::Error;

/// Errors raised by the model, solvers and samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter failed its validity check.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A quantity left the representable floating-point range, or a step size
    /// is too large for the requested truncation.
    #[error("numeric range error in `{name}`: {reason}")]
    Range { name: &'static str, reason: String },

    /// A linear solve hit a zero or non-finite pivot.
    #[error("linear solve failed at row {row}: pivot {pivot}")]
    LinearSolve { row: usize, pivot: f64 },

    /// A computed second moment went negative beyond roundoff.
    #[error("moment component {index} is {value:e}, below the roundoff threshold")]
    NegativeMoment { index: usize, value: f64 },

    /// The accuracy self-check of a solver failed.
    #[error("solver accuracy check failed: {0}")]
    Stiffness(String),

    /// A sampler ran past its safety limit.
    #[error("safety limit exceeded: {0}")]
    SafetyLimit(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn range(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Range {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors the CLI reports as numeric-range failures.
    pub fn is_range(&self) -> bool {
        matches!(self, Error::Range { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
