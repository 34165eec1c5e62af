//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants map one-to-one onto
//! the CLI's exit-code categories, so a shape mismatch deep in a training run
//! surfaces as the same category at the shell.

use thiserror::Error;

/// Error categories shared by the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch between numeric containers. The message names both shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid or inconsistent configuration (hyperparameters, layer specs, flags).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Data that is structurally valid but unusable (empty set, empty location, bad split).
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values or numerically degenerate systems.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed file contents (bad header, non-numeric cell, invalid JSON).
    #[error("parse error: {0}")]
    Parse(String),

    /// Filesystem failures.
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
