use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent configuration (sequence specs, lists).
    #[error("configuration error: {0}")]
    Config(String),

    /// The best-first enumeration hit its memory guard.
    #[error("capacity exceeded: {what} reached the cap of {cap}; use convolution mode")]
    Capacity { what: &'static str, cap: usize },

    /// A binned measure does not cover the requested mass.
    #[error("range error: {0}")]
    Range(String),

    #[error("numeric error: {message} (achieved {achieved:e})")]
    Numeric { message: String, achieved: f64 },

    /// The requested asymptotic normalization does not exist for this scenario.
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
