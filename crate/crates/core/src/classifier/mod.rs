//! One-vs-rest multi-label training and prediction.
//!
//! Every category is an independent binary problem: its own hyperplane,
//! trained on the whole training corpus with `y = +1` for documents
//! carrying the label, and its own sigmoid calibration. All categories
//! share one lexicon.

mod bundle;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{fit_sigmoid, SigmoidCalibration};
use crate::corpus::{proportional_counts, Corpus, Document};
use crate::qp_svm::{self, Hyperplane, SolverParams, TrainingSet};
use crate::textpipe::{Analyzer, Lexicon, Token};
use crate::vectorizer::{Featurizer, SparseVector, Weighting};
use crate::{Error, Result};

pub use bundle::{load_bundle, save_bundle, seal_bundle_text, BUNDLE_FORMAT_VERSION};

/// Training settings. Defaults: `df_threshold = 2`, TF×IDF weighting,
/// `C = 1`, categories need 100 positive documents, 10 % of the training
/// documents calibrate the sigmoid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub df_threshold: u32,
    pub weighting: Weighting,
    pub c: f64,
    pub min_category_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            df_threshold: 2,
            weighting: Weighting::TfIdf,
            c: 1.0,
            min_category_size: 100,
            validation_fraction: 0.1,
            seed: 0,
            tol: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.df_threshold == 0 {
            return bad("df_threshold must be at least 1".into());
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation_fraction must be in [0, 1), got {}", self.validation_fraction));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    fn solver(&self) -> SolverParams {
        SolverParams::with_tol(self.tol)
    }
}

/// Hyperplane and calibration for one category.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryModel {
    pub category: String,
    pub c: f64,
    pub hyperplane: Hyperplane,
    pub calibration: SigmoidCalibration,
    pub converged: bool,
    /// Checksum of the lexicon the weights index into.
    pub lexicon_hash: String,
    /// Training documents seen by the final hyperplane.
    pub trained_on: usize,
    /// Positive documents among them.
    pub positives: usize,
}

/// A category left untrained because it has too few positive documents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCategory {
    pub category: String,
    pub positives: usize,
}

/// Shared featurizer plus one model per trained category.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub featurizer: Featurizer,
    pub models: BTreeMap<String, CategoryModel>,
    pub skipped: Vec<SkippedCategory>,
    pub config: TrainConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictMode {
    /// `label = sgn(f)`.
    Raw,
    /// `label = +1` iff the calibrated probability is at least ½.
    Calibrated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub f: f64,
    pub p: f64,
    pub label: i8,
}

impl CategoryModel {
    pub fn predict_vector(&self, x: &SparseVector, mode: PredictMode) -> Result<Prediction> {
        let f = self.hyperplane.decision_value(x)?;
        Ok(self.prediction(f, mode))
    }

    fn prediction(&self, f: f64, mode: PredictMode) -> Prediction {
        let p = self.calibration.probability(f);
        let positive = match mode {
            PredictMode::Raw => f >= 0.0,
            PredictMode::Calibrated => p >= 0.5,
        };
        Prediction {
            f,
            p,
            label: if positive { 1 } else { -1 },
        }
    }
}

/// Stratified `(fit, holdout)` index split.
///
/// Documents are ranked by a hash of the seed, the category and the document
/// id, and the holdout takes the top of each class. A label edit therefore
/// moves at most a document or two between the parts, and categories never
/// influence one another.
fn holdout_split(ids: &[&str], y: &[i8], fraction: f64, seed: u64, category: &str) -> (Vec<usize>, Vec<usize>) {
    let n = y.len();
    let n_hold = (fraction * n as f64).round() as usize;
    let key = |i: usize| -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(category.as_bytes());
        h.update([0]);
        h.update(ids[i].as_bytes());
        h.finalize().into()
    };
    type Keyed = Vec<(usize, [u8; 32])>;
    let (mut pos, mut neg): (Keyed, Keyed) = (0..n).map(|i| (i, key(i))).partition(|&(i, _)| y[i] > 0);
    pos.sort_by_key(|p| p.1);
    neg.sort_by_key(|p| p.1);
    let [_, pos_hold] = proportional_counts(pos.len(), &[n - n_hold, n_hold]);
    let neg_hold = n_hold - pos_hold;
    let mut hold: Vec<usize> = pos[..pos_hold].iter().chain(&neg[..neg_hold]).map(|p| p.0).collect();
    let mut fit: Vec<usize> = pos[pos_hold..].iter().chain(&neg[neg_hold..]).map(|p| p.0).collect();
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

fn subset(vectors: &[SparseVector], y: &[i8], idx: &[usize], c: f64) -> Result<TrainingSet> {
    TrainingSet::new(idx.iter().map(|&i| vectors[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect(), c)
}

/// Trains one category over precomputed document vectors.
///
/// The sigmoid is fit on decision values of a held-out slice
/// (`validation_fraction`) scored by a hyperplane trained on the rest; the
/// final hyperplane is then retrained on every document and keeps that
/// sigmoid. If the holdout lacks either class (or the fraction is zero), the
/// sigmoid is fit on the final model's training decision values instead.
pub fn train_category(
    vectors: &[SparseVector],
    labels: &[i8],
    ids: &[&str],
    category: &str,
    lexicon_hash: &str,
    config: &TrainConfig,
) -> Result<CategoryModel> {
    let params = config.solver();
    let full = TrainingSet::new(vectors.to_vec(), labels.to_vec(), config.c)?;
    let (sol, hyperplane) = qp_svm::train(&full, &params)?;

    let (fit_idx, hold_idx) = holdout_split(ids, labels, config.validation_fraction, config.seed, category);
    let has_both = |idx: &[usize]| idx.iter().any(|&i| labels[i] > 0) && idx.iter().any(|&i| labels[i] < 0);
    let holdout = if has_both(&fit_idx) && has_both(&hold_idx) {
        let ts = subset(vectors, labels, &fit_idx, config.c)?;
        match qp_svm::train(&ts, &params) {
            Ok((_, h)) => Some(h),
            Err(Error::DegenerateModel) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let calibration = match holdout {
        Some(h) => {
            let scores = hold_idx
                .iter()
                .map(|&i| h.decision_value(&vectors[i]))
                .collect::<Result<Vec<f64>>>()?;
            let y: Vec<i8> = hold_idx.iter().map(|&i| labels[i]).collect();
            fit_sigmoid(&scores, &y)?
        }
        None => {
            let scores = vectors.iter().map(|x| hyperplane.decision_value(x)).collect::<Result<Vec<f64>>>()?;
            fit_sigmoid(&scores, labels)?
        }
    };

    Ok(CategoryModel {
        category: category.to_string(),
        c: config.c,
        hyperplane,
        calibration,
        converged: sol.converged,
        lexicon_hash: lexicon_hash.to_string(),
        trained_on: labels.len(),
        positives: labels.iter().filter(|&&l| l > 0).count(),
    })
}

/// Builds the lexicon from `corpus` and trains one model per category with
/// at least `min_category_size` positive documents. Smaller categories are
/// listed in [`ModelBundle::skipped`].
pub fn train_all(corpus: &Corpus, analyzer: &Analyzer, config: &TrainConfig) -> Result<ModelBundle> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidConfig("cannot train on an empty corpus".into()));
    }
    let featurizer = Featurizer::fit(corpus, analyzer.clone(), config.df_threshold, config.weighting)?;
    train_with_featurizer(corpus, featurizer, config)
}

/// Like [`train_all`] but over an existing featurizer (lexicon and IDF).
pub fn train_with_featurizer(corpus: &Corpus, featurizer: Featurizer, config: &TrainConfig) -> Result<ModelBundle> {
    config.validate()?;
    let vectors = featurizer.vectorize_corpus(corpus);
    let lexicon_hash = featurizer.lexicon.checksum();
    let ids: Vec<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
    let (trainable, skipped): (Vec<_>, Vec<_>) = corpus
        .categories()
        .iter()
        .map(|c| (c, corpus.positives(c)))
        .partition(|(_, p)| *p >= config.min_category_size);
    let skipped: Vec<SkippedCategory> = skipped
        .into_iter()
        .map(|(c, p)| SkippedCategory {
            category: c.clone(),
            positives: p,
        })
        .collect();
    if trainable.is_empty() {
        return Err(Error::NoTrainableCategories { skipped: skipped.len() });
    }
    let models = trainable
        .par_iter()
        .map(|(category, _)| {
            let labels: Vec<i8> = corpus.iter().map(|d| d.sign(category)).collect();
            train_category(&vectors, &labels, &ids, category, &lexicon_hash, config).map(|m| ((*category).clone(), m))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ModelBundle {
        featurizer,
        models,
        skipped,
        config: config.clone(),
    })
}

impl ModelBundle {
    pub fn lexicon(&self) -> &Lexicon {
        &self.featurizer.lexicon
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn model(&self, category: &str) -> Result<&CategoryModel> {
        self.models.get(category).ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    pub fn vectorize(&self, doc: &Document) -> SparseVector {
        self.featurizer.vectorize(doc)
    }

    /// Scores `doc` against every category. Documents with no lexicon terms
    /// get the bias-only decision `f = b`.
    pub fn predict(&self, doc: &Document, mode: PredictMode) -> BTreeMap<String, Prediction> {
        self.predict_vector(&self.vectorize(doc), mode)
    }

    pub fn predict_vector(&self, x: &SparseVector, mode: PredictMode) -> BTreeMap<String, Prediction> {
        self.models
            .iter()
            .map(|(c, m)| {
                let p = m.predict_vector(x, mode).expect("vectors come from the bundle's own lexicon");
                (c.clone(), p)
            })
            .collect()
    }

    /// Retrains a single category's model from `corpus` (same lexicon and
    /// settings), leaving every other model untouched.
    pub fn retrain_category(&self, corpus: &Corpus, category: &str) -> Result<ModelBundle> {
        let positives = corpus.positives(category);
        if positives < self.config.min_category_size {
            return Err(Error::CategoryTooSmall {
                category: category.to_string(),
                positives,
                min: self.config.min_category_size,
            });
        }
        let vectors = self.featurizer.vectorize_corpus(corpus);
        let labels: Vec<i8> = corpus.iter().map(|d| d.sign(category)).collect();
        let ids: Vec<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
        let model = train_category(&vectors, &labels, &ids, category, &self.lexicon().checksum(), &self.config)?;
        let mut next = self.clone();
        next.skipped.retain(|s| s.category != category);
        next.models.insert(category.to_string(), model);
        Ok(next)
    }
}

/// Free-function form of [`ModelBundle::predict`].
pub fn predict(bundle: &ModelBundle, doc: &Document, mode: PredictMode) -> BTreeMap<String, Prediction> {
    bundle.predict(doc, mode)
}

/// Largest and smallest weight components of a model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopWeights {
    /// Descending by weight.
    pub positive: Vec<(Token, f64)>,
    /// Ascending by weight (most negative first).
    pub negative: Vec<(Token, f64)>,
}

/// The `k` terms with the largest and the `k` with the smallest weights
/// among the model's nonzero components. Fewer are returned when the weight
/// vector has fewer nonzeros.
pub fn top_weights(model: &CategoryModel, lexicon: &Lexicon, k: usize) -> Result<TopWeights> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if model.hyperplane.dim() != lexicon.len() {
        return Err(Error::DimensionMismatch {
            left: model.hyperplane.dim(),
            right: lexicon.len(),
        });
    }
    let mut entries: Vec<(u32, f64)> = model.hyperplane.w.entries().to_vec();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let named = |(i, w): (u32, f64)| (lexicon.term(i as usize).clone(), w);
    let positive = entries.iter().copied().take(k).map(named).collect();
    let negative = entries.iter().rev().copied().take(k).map(named).collect();
    Ok(TopWeights { positive, negative })
}
