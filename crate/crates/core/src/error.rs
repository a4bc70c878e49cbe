use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("grid resolution {m} cannot represent modes of order {n} (need at least {required} points per axis)")]
    Aliasing { m: usize, n: usize, required: usize },

    #[error("covariance is not trace class: {0}")]
    TraceClass(String),

    #[error("step {step} failed: {reason} (norm {norm:e})")]
    StepFailure { step: usize, reason: String, norm: f64 },

    #[error("diagnostics unavailable: {0}")]
    Diagnostics(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
