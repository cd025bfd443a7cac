use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("truncation order {order} is below the potential degree {degree}")]
    TruncationTooLow { order: usize, degree: usize },

    #[error("insufficient data: {needed} {what} required, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureDiverged { a: f64, b: f64 },

    #[error("local time {target} at site {site} was not reached")]
    TargetNotReached { site: usize, target: f64 },

    #[error("trajectory has no event log")]
    MissingEventLog,

    #[error("negative local time {value} at site {site}")]
    NegativeLocalTime { site: usize, value: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {value}")))
    }
}
