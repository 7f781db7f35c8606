use thiserror::Error;

/// Errors raised by the fitting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("x = {x} lies outside the basis domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("design is rank deficient on the knot span [{lo}, {hi}]")]
    RankDeficient { lo: f64, hi: f64 },

    #[error("IRLS diverged after {iterations} iterations (penalized deviance {deviance:e})")]
    Diverged { iterations: usize, deviance: f64 },

    #[error("invalid response for the {family} family at index {index}: {value}")]
    InvalidResponse {
        family: &'static str,
        index: usize,
        value: f64,
    },

    #[error("no usable model on the penalty path")]
    EmptyPath,
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::RankDeficient { .. }
                | Error::Diverged { .. }
                | Error::EmptyPath
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}
