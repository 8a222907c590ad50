use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("horizon {horizon} too large for exact enumeration (max {max})")]
    HorizonTooLarge { horizon: usize, max: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no sign change of the expected loss on [{lo}, {hi}] (loss {loss_lo:.4e} .. {loss_hi:.4e})")]
    NoSignChange { lo: f64, hi: f64, loss_lo: f64, loss_hi: f64 },

    #[error("expected loss is identically zero; stationary multiplier is not unique")]
    DegenerateLoss,

    #[error("log-log fit requires positive values, got {0}")]
    NonPositive(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
