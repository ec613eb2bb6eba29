use thiserror::Error;

/// Errors produced by the optimization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The prox of the shifted regularizer is not well posed: `t * mu_g >= 1`.
    #[error("prox step too large: t = {step}, mu_g = {mu_g} (t * mu_g must be < 1)")]
    StepTooLarge { step: f64, mu_g: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("reference solution unreliable: {0}")]
    ReferenceUnreliable(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
