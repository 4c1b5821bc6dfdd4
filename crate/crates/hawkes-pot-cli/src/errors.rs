//! CLI error type with process exit codes: 2 usage/config, 3 data,
//! 4 numerical.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 2).
    Usage(String),
    /// Unreadable or invalid input data (exit 3).
    Data(String),
    /// Numerical failure during inference or scoring (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hawkes_pot::Error> for CliError {
    fn from(e: hawkes_pot::Error) -> Self {
        match e {
            hawkes_pot::Error::Parameter(m) => CliError::Usage(m),
            hawkes_pot::Error::Input(m) => CliError::Data(m),
            hawkes_pot::Error::Numerical(m) => CliError::Numerical(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("JSON error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("CSV error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
