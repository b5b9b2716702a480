use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which of the two IDX files a parse error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxFile {
    Images,
    Labels,
}

impl std::fmt::Display for IdxFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IdxFile::Images => f.write_str("image"),
            IdxFile::Labels => f.write_str("label"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad {file} magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { file: IdxFile, expected: u32, found: u32 },

    #[error("count mismatch: image file holds {images} items, label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("truncated {file} file: {field} needs {needed} bytes, only {available} present")]
    Truncated {
        file: IdxFile,
        field: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("bad image dimension: {field} is {found}, expected 28")]
    Dimension { field: &'static str, found: usize },

    #[error("bad label value {value} at item {item}: labels must be digits 0-9")]
    Label { item: usize, value: u8 },

    #[error("split error for digit {digit}: {message}")]
    Split { digit: usize, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parameter(message: impl Into<String>) -> Self {
        Error::Parameter(message.into())
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}
