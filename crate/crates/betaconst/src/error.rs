//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by configuration validation, statistics, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An argument or data shape is invalid for the requested operation.
    #[error("invalid input: {0}")]
    Input(String),
    /// The data admit no meaningful estimate (e.g. every increment truncated,
    /// zero retained variation, vanishing denominator under a hard guard).
    #[error("degenerate data: {0}")]
    Degenerate(String),
    /// A CSV record could not be parsed; `line` is 1-based within the file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
