use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Array or image dimensions do not fit the operation.
    #[error("shape error: {0}")]
    Shape(String),
    /// Input values are outside their valid domain (non-finite, out of range).
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// Manifest or CSV parse failure. `row` is 1-based and counts the header.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
