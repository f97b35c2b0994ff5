use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("unknown label {label:?} (row {row})")]
    UnknownLabel { label: String, row: usize },
    #[error("duplicate annotation for sample {sample_id:?} by annotator {annotator_id:?} (row {row})")]
    DuplicateAnnotation {
        sample_id: String,
        annotator_id: String,
        row: usize,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has {0} samples, at least 10 are needed for an 80/10/10 split")]
    CorpusTooSmall(usize),
    #[error("unknown sample id {0:?}")]
    UnknownSample(String),
    #[error("sample {0:?} has no annotations")]
    NoAnnotations(String),
    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),
    #[error("missing embedding for sample {0:?}")]
    MissingEmbedding(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value in embedding for sample {0:?}")]
    NonFinite(String),
    #[error("empty history")]
    EmptyHistory,
    #[error("need at least 2 vectors to fit PCA, got {0}")]
    TooFewPoints(usize),
    #[error("pool is empty")]
    EmptyPool,
    #[error("no available annotators for sample {0:?}")]
    NoAvailableAnnotators(String),
    #[error("empty log")]
    EmptyLog,
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
