use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("invalid image: {0}")]
    Image(String),

    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("encode error: {0}")]
    Encode(String),

    #[error("placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },

    #[error("{path}:{line}: {message}")]
    Annotation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    /// An ERROR message returned by the remote provider.
    #[error("remote error ({code}): {message}")]
    Remote { code: String, message: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("unknown detector `{0}`")]
    UnknownDetector(String),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
