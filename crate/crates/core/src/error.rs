use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a documented invariant (negative rate, empty list, ...).
    #[error("invalid input: {0}")]
    Validation(String),
    /// The request is well-formed but mathematically outside the domain,
    /// e.g. an efficiency above the bound.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// The drive synthesis hit a zero of |alpha(t)|.
    #[error("pole in the drive at t = {t:.6} ns (r^2 = {r2:.3e}); reduce the target efficiency")]
    Pole { t: f64, r2: f64 },
    /// The requested path does not support this input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The truncated master-equation model was left.
    #[error("model error: {0}")]
    Model(String),
    /// Gate-level protocol misuse.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors caused by the caller's inputs rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Unsupported(_) | Error::Protocol(_) | Error::Json(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
