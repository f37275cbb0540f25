use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by loading, splitting, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no randomized data")]
    NoRandomizedData,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate triple: user {user}, item {item}")]
    DuplicateTriple { user: usize, item: usize },

    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),

    #[error("source tag mismatch: {0}")]
    SourceMismatch(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0} requires randomized data")]
    RequiresRandomized(&'static str),

    #[error("invalid hyperparameter: {0}")]
    HyperParam(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite parameters after epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
