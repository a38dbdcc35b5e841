use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("empty recording: {0}")]
    EmptyRecording(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("cannot build subject-disjoint split: {0}")]
    Split(String),

    #[error("dataset contract violated: {0}")]
    Dataset(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite loss or gradient at epoch {epoch}, batch {batch} (records {records:?})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        records: Vec<usize>,
    },

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("checksum failure: {0}")]
    Checksum(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
