use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Carries the best estimate reached and the error bound achieved so far.
    #[error("no convergence in {what}: best estimate {estimate:e}, achieved bound {bound:e}")]
    Convergence {
        what: String,
        estimate: f64,
        bound: f64,
    },

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn convergence(what: impl Into<String>, estimate: f64, bound: f64) -> Self {
        Error::Convergence {
            what: what.into(),
            estimate,
            bound,
        }
    }
}

pub(crate) fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}
