//! # corpusmap
//!
//! Linear support-vector text classification over bag-of-words document
//! metadata (titles, abstracts, author names), built for extracting and
//! maintaining a subject area inside a larger document corpus.
//!
//! The pipeline, module by module:
//!
//! - [`corpus`]: JSON-lines document collections, label binarization and
//!   stratified, seeded splits.
//! - [`textpipe`]: tokenization (stopwords, Porter stemming, two-word phrases,
//!   author tokens) and lexicon construction with document-frequency cutoffs.
//! - [`vectorizer`]: unit-length TF or TF×IDF sparse vectors.
//! - [`qp_svm`]: a working-set solver for the soft-margin SVM dual and
//!   reconstruction of the linear decision rule `f(x) = w·x + b`.
//! - [`calibration`]: sigmoid fitting `P = 1/(1+exp(A·f+B))`.
//! - [`classifier`]: one-vs-rest training, prediction and model bundles.
//! - [`evaluation`]: confusion metrics, size curves, ablations, trends.
//! - [`curation`]: outlier ranking by `|α|` and human relabel verdicts.
//! - [`synth`]: seeded synthetic corpora for benchmarks and examples.
//!
//! Every stage has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run -p corpusmap --example train_and_predict
//! ```

pub mod calibration;
pub mod classifier;
pub mod corpus;
pub mod curation;
mod error;
pub mod evaluation;
pub mod fmt;
pub mod qp_svm;
pub mod synth;
pub mod textpipe;
pub mod vectorizer;

pub use calibration::SigmoidCalibration;
pub use classifier::{CategoryModel, ModelBundle, PredictMode, Prediction, TrainConfig};
pub use corpus::{Corpus, Document, SplitSpec, YearMonth};
pub use error::{BundleError, Error, Result};
pub use qp_svm::{DualSolution, Hyperplane, SolverParams, TrainingSet};
pub use textpipe::{Lexicon, PhraseList, Stoplist, Token};
pub use vectorizer::{IdfTable, SparseVector, Weighting};
