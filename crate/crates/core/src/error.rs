use thiserror::Error;

/// Errors surfaced by the simulator, the network engine, and the experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid object `{name}`: {reason}")]
    InvalidObject { name: String, reason: String },

    /// The simulator refused a command; the trial must be discarded.
    #[error("invalid trial: {0}")]
    InvalidTrial(String),

    #[error("shape mismatch at layer `{layer}`: {detail}")]
    Shape { layer: String, detail: String },

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            layer: layer.into(),
            detail: detail.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidObject { .. } => "invalid_object",
            Error::InvalidTrial(_) => "invalid_trial",
            Error::Shape { .. } => "shape",
            Error::StaleCache(_) => "stale_cache",
            Error::Dataset(_) => "dataset",
            Error::Calibration(_) => "calibration",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
