//! Command-line pipeline and HTTP service over [`corpusmap`] models.
//!
//! The `corpusmap` binary is a thin wrapper around [`cli::run`]; the HTTP
//! router is available as [`server::router`] for embedding and tests.

pub mod cli;
pub mod config;
pub mod server;

pub use config::PipelineConfig;

use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] corpusmap::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("no {0} path given (use the flag or set it in the config file)")]
    MissingSetting(&'static str),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Input(String),
}

impl ServiceError {
    /// Stable machine-readable name, used in CLI and HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        use corpusmap::Error as E;
        match self {
            ServiceError::Core(e) => match e {
                E::Io { .. } => "io",
                E::Parse { .. } | E::DuplicateId { .. } | E::InvalidDocument { .. } => "corpus",
                E::UnknownCategory(_) => "unknown_category",
                E::UnknownDocument(_) => "unknown_document",
                E::ContradictoryVerdicts(_) => "contradictory_verdicts",
                E::CategoryTooSmall { .. } | E::NoTrainableCategories { .. } => "category_too_small",
                E::Bundle(_) => "bundle",
                E::InvalidConfig(_) | E::InvalidSplit(_) => "invalid_argument",
                _ => "training",
            },
            ServiceError::Config(_) | ServiceError::MissingSetting(_) => "config",
            ServiceError::Io(_) => "io",
            ServiceError::Json(_) | ServiceError::Input(_) => "invalid_input",
        }
    }
}
