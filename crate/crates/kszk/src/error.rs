//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong between a config file and a finished run.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain (negative length, zero dt, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mode index or array shape does not match the grid it is used with.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Config file or override could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// A linear solve inside the time stepper failed.
    #[error("solver error: {0}")]
    Solver(String),

    /// Not enough usable data for a least-squares fit.
    #[error("fit error: {0}")]
    Fit(String),

    /// Snapshot file is malformed or truncated.
    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
