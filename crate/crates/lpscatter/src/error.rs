use thiserror::Error;

/// Failure categories. The CLI maps each category to its own exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical precondition violated: {0}")]
    Precondition(String),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report error: {0}")]
    Report(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
