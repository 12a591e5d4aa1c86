use thiserror::Error;

/// Errors surfaced by the library. Contract violations indicate a caller
/// broke a documented precondition; the remaining variants are runtime
/// conditions (data too small, learner misuse, bad config or files).
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient data: need {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("learner sequencing violation: {0}")]
    Sequencing(String),

    #[error("decoded state {state} out of range at level {level} (limit {limit})")]
    DecodingRange {
        level: usize,
        state: usize,
        limit: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
