use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural mismatch between tensors, specs, or batch shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Non-finite value where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Invalid configuration or an operation the configuration cannot support.
    #[error("config error: {0}")]
    Config(String),

    /// Contract violation (e.g. stepping a terminal episode).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Checkpoint file rejected (bad magic, version, or spec hash).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training diverged (non-finite loss twice in a row).
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },

    /// Exact-enumeration oracle exceeded its atom budget or found a cycle.
    #[error("enumeration failed: {0}")]
    Enumeration(String),

    #[error("missing weights: {0}")]
    MissingWeights(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml error: {0}")]
    Toml(String),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
