//! Error type shared by every module in the crate.

/// Errors produced by matrix, decomposition, training, and metric routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not satisfy the operation's contract.
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    /// An argument is outside its documented range.
    InvalidArgument { op: &'static str, reason: String },
    /// A constructor was handed NaN or infinite data.
    NonFinite { op: &'static str },
    /// An iterative solver exhausted its sweep budget without converging.
    NoConvergence { op: &'static str, iterations: usize },
    /// The requested metric is undefined on the given inputs.
    UndefinedMetric { reason: String },
    /// Training produced a non-finite loss.
    TrainingFailure { step: usize, reason: String },
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::DimensionMismatch { op, expected, got } => {
                write!(f, "{op}: dimension mismatch, expected {expected}, got {got}")
            }
            Error::InvalidArgument { op, reason } => write!(f, "{op}: {reason}"),
            Error::NonFinite { op } => write!(f, "{op}: non-finite entry rejected"),
            Error::NoConvergence { op, iterations } => {
                write!(f, "{op}: no convergence after {iterations} iterations")
            }
            Error::UndefinedMetric { reason } => write!(f, "undefined metric: {reason}"),
            Error::TrainingFailure { step, reason } => {
                write!(f, "training failed at step {step}: {reason}")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(
    op: &'static str,
    expected: impl std::fmt::Display,
    got: impl std::fmt::Display,
) -> Error {
    Error::DimensionMismatch {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        op,
        reason: reason.into(),
    }
}
