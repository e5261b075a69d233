use serde::Serialize;

/// Errors surfaced by the library. Each variant maps onto a CLI exit code.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("evidence diverges: {0}")]
    Divergence(String),
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("not defined: {0}")]
    NotDefined(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 2 for usage problems, 1 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Parse(_) | Error::NotSupported(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
