use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A model spec string that names no built-in architecture and no readable file.
    #[error("unknown model spec '{0}'")]
    UnknownSpec(String),

    /// A weight or model file exists but cannot be read or parsed.
    #[error("failed to load '{path}': {reason}")]
    Load { path: PathBuf, reason: String },

    /// An argument violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A dataset or image set could not be ingested.
    #[error("ingestion failed: {0}")]
    Ingestion(String),

    /// Spearman correlation is undefined (constant ranks or too few entries).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("i/o error at '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("could not decode image '{path}': {reason}")]
    ImageDecode { path: PathBuf, reason: String },

    #[error("plotting failed: {0}")]
    Plot(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
