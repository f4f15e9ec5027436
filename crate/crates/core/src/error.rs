use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum MrhError {
    /// Inconsistent model/run configuration or incompatible artifacts.
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid input data. `row` is 1-based over data rows (header excluded).
    #[error("data error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Data { row: Option<usize>, message: String },
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed chain or info file.
    #[error("format error: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MrhError {
    pub(crate) fn data(message: impl Into<String>) -> Self {
        MrhError::Data { row: None, message: message.into() }
    }

    pub(crate) fn data_at(row: usize, message: impl Into<String>) -> Self {
        MrhError::Data { row: Some(row), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MrhError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, MrhError>;
