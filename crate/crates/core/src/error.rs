use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid simplex point: {0}")]
    InvalidPoint(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generator is not regular: {0}")]
    NotRegular(String),

    #[error("vector is not tangent to the simplex (component sum {0:e})")]
    NotTangent(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("point left the dual range at t = {t}")]
    OutsideDualRange { t: f64 },

    #[error("degenerate plane (area {0:e})")]
    DegeneratePlane(f64),

    #[error("support of size {0} is too large for enumeration (max 8)")]
    SupportTooLarge(usize),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of a numerical procedure, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotRegular(_)
                | Error::NoConvergence { .. }
                | Error::Integration { .. }
                | Error::OutsideDualRange { .. }
                | Error::DegeneratePlane(_)
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
