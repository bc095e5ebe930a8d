use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("invalid document {id:?}: {message}")]
    InvalidDocument { id: String, message: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("empty lexicon: no token reaches the document-frequency threshold")]
    EmptyLexicon,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("degenerate model: weight vector is zero")]
    DegenerateModel,

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("no trainable categories ({skipped} below the size cutoff)")]
    NoTrainableCategories { skipped: usize },

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("category {category:?} has {positives} positive documents, below the cutoff of {min}")]
    CategoryTooSmall {
        category: String,
        positives: usize,
        min: usize,
    },

    #[error("unknown document id {0:?}")]
    UnknownDocument(String),

    #[error("contradictory verdicts for document {0:?}")]
    ContradictoryVerdicts(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Bundle(#[from] BundleError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Failures specific to reading a saved [`ModelBundle`](crate::ModelBundle).
#[derive(Debug, Error)]
pub enum BundleError {
    #[error("unsupported bundle format version {found} (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },

    #[error("bundle checksum mismatch (stored {stored}, computed {computed})")]
    ChecksumMismatch { stored: String, computed: String },

    #[error("lexicon checksum mismatch for category {category:?}")]
    LexiconMismatch { category: String },

    #[error("bundle is missing the section for category {0:?}")]
    MissingCategory(String),

    #[error("malformed bundle at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
