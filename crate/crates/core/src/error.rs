//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by model fitting, evaluation, and resampling.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A fit could not be completed (degenerate data, too few points, ...).
    #[error("fit error: {0}")]
    Fit(String),

    /// An optimizer failed to produce a usable result.
    #[error("optimization error: {0}")]
    Optimization(String),

    /// A model failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Too many bootstrap replications failed to refit.
    #[error("bootstrap error: {0}")]
    Bootstrap(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand used by validation code.
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
}
