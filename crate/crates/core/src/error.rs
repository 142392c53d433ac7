use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("integration diverged at step {step} (t = {time_s:e} s): {reason}")]
    Integration {
        step: usize,
        time_s: f64,
        reason: String,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stream {stream}: {source}")]
    Stream {
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_stream(self, stream: u64) -> Self {
        Error::Stream {
            stream,
            source: Box::new(self),
        }
    }
}
