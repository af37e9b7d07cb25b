use std::io;

use thiserror::Error;

use crate::pattern::CompileError;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Pattern(#[from] CompileError),

    /// An asset file (lexicon, term list, category lexicon) could not be parsed.
    #[error("malformed asset {name}: {message}")]
    Asset { name: String, message: String },

    /// A caller-supplied argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The data cannot support the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn asset(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Asset {
            name: name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn insufficient(message: impl Into<String>) -> Self {
        Error::InsufficientData(message.into())
    }

    /// Short machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Pattern(_) => "pattern_syntax",
            Error::Asset { .. } => "asset",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InsufficientData(_) => "insufficient_data",
            Error::ModelFormat(_) => "model_format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
