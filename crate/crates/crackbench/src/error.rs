use std::fmt;
use std::path::{Path, PathBuf};

use crate::formats::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::Io { .. } | Error::Data { .. } => 2,
            Error::Internal(_) => 3,
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }
}

/// Attaches the file or item a data error came from.
pub(crate) trait Context<T> {
    fn context(self, what: impl fmt::Display) -> Result<T>;
}

impl<T, E: fmt::Display> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl fmt::Display) -> Result<T> {
        self.map_err(|e| Error::Data { context: what.to_string(), message: e.to_string() })
    }
}

impl From<FormatError> for Error {
    fn from(e: FormatError) -> Self {
        Error::Data { context: "format".into(), message: e.to_string() }
    }
}

/// A configuration problem, pointing at the file line or flag responsible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn at_line(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self { location: format!("{}:{line}", path.display()), message: message.into() }
    }

    pub fn flag(flag: &str, message: impl Into<String>) -> Self {
        Self { location: format!("--{flag}"), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration at {}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}
