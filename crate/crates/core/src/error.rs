use std::ops::Range;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent configuration: missing files, invalid parameters,
    /// unknown target class.
    #[error("configuration error: {0}")]
    Config(String),

    /// The input cannot be explained or evaluated (empty document, bad positions).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A remote prediction request failed. `batch` is the range of input
    /// indices covered by the failed request.
    #[error("transport error for inputs {}..{}: {message}", batch.start, batch.end)]
    Transport { batch: Range<usize>, message: String },

    /// Exhaustive enumeration refused because the document is too long.
    #[error("document too long for exhaustive enumeration: b = {b} > {max}")]
    TooLarge { b: usize, max: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
