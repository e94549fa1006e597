use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shift system is singular (|det| = {det:e}); check alpha and the grid span")]
    SingularShift { det: f64 },

    #[error("shift periodicity residual too large: value {value:e}, slope {slope:e}, tolerance {tolerance:e}")]
    ShiftResidual { value: f64, slope: f64, tolerance: f64 },

    #[error("non-finite value at step {step} (scheme {scheme}) in {what}")]
    NonFinite {
        step: usize,
        scheme: String,
        what: &'static str,
    },

    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),

    #[error("oracle not applicable: {0}")]
    OracleInapplicable(String),

    #[error("{0}")]
    Insufficient(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
