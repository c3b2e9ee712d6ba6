use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration values (schedule ranges, network dims, schedule rows).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's preconditions (shape mismatch, out-of-range step).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Exit schedule or network architecture do not agree.
    #[error("architecture mismatch: {0}")]
    Architecture(String),

    /// Unknown name in the schedule catalog.
    #[error("unknown schedule `{0}`")]
    Catalog(String),

    /// A denominator that must be strictly positive was not.
    #[error("division guard: {0}")]
    DivisionGuard(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss = {loss} ({detail})")]
    Diverged { step: u64, loss: f64, detail: String },

    /// Malformed checkpoint or sample file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
