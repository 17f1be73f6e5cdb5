use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KblError {
    /// An argument outside the domain of a mathematical operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid experiment or object configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A computation produced a non-finite or otherwise unusable number.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Picard iteration ran out of budget before meeting its tolerance.
    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, KblError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(KblError::Config(msg.into()))
}
