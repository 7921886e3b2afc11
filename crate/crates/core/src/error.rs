//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An input value (signal, spectrogram, ...) was unusable.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor or matrix shapes do not line up.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// An operation produced NaN or infinity.
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    /// Backward was called without the context saved by forward.
    #[error("missing saved context: {0}")]
    MissingContext(&'static str),

    /// Training diverged (NaN loss) at the given step.
    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A file did not match its expected format.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid_parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn shape_mismatch(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
