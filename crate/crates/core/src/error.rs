use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("undefined beta: {0}")]
    UndefinedBeta(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("hypothesis not satisfied: {0}")]
    HypothesisViolated(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
