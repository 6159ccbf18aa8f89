use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A time value fell outside the admissible interval.
    TimeOutOfDomain { t: f64, lower: f64, upper: f64 },
    /// A scalar parameter violated its contract.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// Cholesky factorization failed for a mixture component.
    NotPositiveDefinite { component: usize },
    /// A collection that must be non-empty was empty.
    Empty(&'static str),
    /// A documented precondition of an operation did not hold.
    Precondition(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                actual,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {actual}"),
            Error::TimeOutOfDomain { t, lower, upper } => {
                write!(f, "time {t} outside [{lower}, {upper}]")
            }
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::NotPositiveDefinite { component } => {
                write!(f, "covariance of component {component} is not positive definite")
            }
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::Precondition(what) => write!(f, "precondition violated: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
