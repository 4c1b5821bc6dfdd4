use thiserror::Error;

/// Errors produced by model construction, inference and scoring.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its domain (e.g. a nonpositive GPD scale).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data violates a structural precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A numerical operation failed (overflow, degenerate truncation, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
