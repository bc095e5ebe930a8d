use std::path::{Path, PathBuf};

use corpusmap::curation::OutlierParams;
use corpusmap::evaluation::Bucket;
use corpusmap::textpipe::Analyzer;
use corpusmap::{PhraseList, Stoplist, TrainConfig, Weighting};
use serde::{Deserialize, Serialize};

use crate::{Result, ServiceError};

/// Everything a pipeline run needs. Loaded from TOML; command-line flags
/// override individual fields.
///
/// ```toml
/// corpus = "data/train.jsonl"
/// model = "out/model.bundle"
/// df_threshold = 2
/// weighting = "tfidf"
/// c = 1.0
/// clean_c = 10.0
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    /// Missing means the built-in stoplist.
    pub stoplist: Option<PathBuf>,
    pub phrases: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Audit log of relabel verdicts (JSON lines).
    pub verdict_log: Option<PathBuf>,
    pub df_threshold: u32,
    pub weighting: Weighting,
    /// Soft-margin penalty of the deployed classifiers.
    pub c: f64,
    /// Penalty of the outlier run used for label cleaning.
    pub clean_c: f64,
    pub min_category_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub bucket: Bucket,
    /// Training share when a command has to split a single corpus.
    pub train_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            stoplist: None,
            phrases: None,
            model: None,
            verdict_log: None,
            df_threshold: 2,
            weighting: Weighting::TfIdf,
            c: 1.0,
            clean_c: 10.0,
            min_category_size: 100,
            validation_fraction: 0.1,
            seed: 0,
            bucket: Bucket::Year,
            train_fraction: 2.0 / 3.0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let bad = |msg: String| Err(ServiceError::Config(msg));
        if !(self.clean_c.is_finite() && self.clean_c > 0.0) {
            return bad(format!("clean_c must be positive, got {}", self.clean_c));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            df_threshold: self.df_threshold,
            weighting: self.weighting,
            c: self.c,
            min_category_size: self.min_category_size,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn outlier_params(&self, k: usize) -> OutlierParams {
        OutlierParams {
            k,
            c: self.clean_c,
            min_category_size: self.min_category_size,
            ..OutlierParams::default()
        }
    }

    pub fn analyzer(&self) -> Result<Analyzer> {
        let stoplist = match &self.stoplist {
            Some(p) => Stoplist::load(p)?,
            None => Stoplist::standard(),
        };
        let phrases = match &self.phrases {
            Some(p) => PhraseList::load(p)?,
            None => PhraseList::new(),
        };
        Ok(Analyzer::new(stoplist, phrases))
    }

    pub fn require_corpus(&self) -> Result<&Path> {
        self.corpus.as_deref().ok_or(ServiceError::MissingSetting("corpus"))
    }

    pub fn require_model(&self) -> Result<&Path> {
        self.model.as_deref().ok_or(ServiceError::MissingSetting("model"))
    }
}
