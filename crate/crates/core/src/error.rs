//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Non-positive pivot in a Cholesky factorization.
    #[error("matrix not positive definite (pivot {index} = {value:e})")]
    Factorization { index: usize, value: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
