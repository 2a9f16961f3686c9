use thiserror::Error;

/// Errors raised anywhere in the summarization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive semidefinite (factorization failed with jitter up to {max_jitter:e})")]
    NotPsd { max_jitter: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("invalid training target: {0}")]
    InvalidTarget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("summary of {duration} frames exceeds the budget of {budget} frames")]
    Budget { duration: usize, budget: usize },

    #[error("parse error in {context} at byte {offset}: {message}")]
    Parse {
        context: String,
        offset: usize,
        message: String,
    },

    #[error("{context}: unsupported format version {found} (expected {expected})")]
    Version {
        context: String,
        found: u32,
        expected: u32,
    },

    #[error("video {video}, {field}: {message}")]
    Record {
        video: String,
        field: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn record(video: &str, field: &str, message: impl Into<String>) -> Self {
        Error::Record {
            video: video.to_string(),
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
