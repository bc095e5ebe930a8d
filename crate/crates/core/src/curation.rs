//! Training-set cleaning: rank documents by their dual coefficient under a
//! large `C`, let a human decide, apply the decisions.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::fmt::sig;
use crate::qp_svm::{self, SolverParams, TrainingSet};
use crate::vectorizer::Featurizer;
use crate::{Error, Result};

/// Settings for an outlier run. Defaults: `k = 50`, `C = 10`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierParams {
    pub k: usize,
    pub c: f64,
    pub min_category_size: usize,
    pub tol: f64,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams {
            k: 50,
            c: 10.0,
            min_category_size: 100,
            tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub rank: usize,
    pub doc_id: String,
    pub alpha: f64,
    pub label: i8,
    pub f: f64,
    pub title: String,
    /// `α = C`: the document violates the margin.
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub category: String,
    pub c: f64,
    pub converged: bool,
    /// Sorted by `|α|` descending, then by `y·f` ascending.
    pub outliers: Vec<Outlier>,
}

impl OutlierReport {
    /// Sum of `|α|` over the reported documents.
    pub fn alpha_mass(&self) -> f64 {
        self.outliers.iter().map(|o| o.alpha.abs()).sum()
    }

    pub fn max_alpha(&self) -> f64 {
        self.outliers.first().map_or(0.0, |o| o.alpha.abs())
    }
}

const TITLE_CHARS: usize = 80;

fn snippet(doc: &Document) -> String {
    let text = if doc.title.is_empty() { &doc.abstract_text } else { &doc.title };
    text.chars().take(TITLE_CHARS).collect()
}

/// Trains an uncalibrated model for `category` at `params.c` over the
/// featurizer's lexicon and returns the `k` training documents with the
/// largest dual coefficients.
pub fn find_outliers(corpus: &Corpus, featurizer: &Featurizer, category: &str, params: &OutlierParams) -> Result<OutlierReport> {
    let positives = corpus.positives(category);
    if positives < params.min_category_size || positives == corpus.len() {
        return Err(Error::CategoryTooSmall {
            category: category.to_string(),
            positives,
            min: params.min_category_size,
        });
    }
    let vectors = featurizer.vectorize_corpus(corpus);
    let y: Vec<i8> = corpus.iter().map(|d| d.sign(category)).collect();
    let ts = TrainingSet::new(vectors, y, params.c)?;
    let (sol, h) = qp_svm::train(&ts, &SolverParams::with_tol(params.tol))?;
    let bound = params.c * (1.0 - 1e-9);

    let mut ranked: Vec<(usize, f64)> = sol
        .support_vectors()
        .map(|i| Ok((i, h.decision_value(&ts.vectors()[i])?)))
        .collect::<Result<_>>()?;
    let y = ts.labels();
    ranked.sort_by(|&(i, fi), &(j, fj)| {
        sol.alpha[j]
            .abs()
            .total_cmp(&sol.alpha[i].abs())
            .then((y[i] as f64 * fi).total_cmp(&(y[j] as f64 * fj)))
            .then_with(|| corpus.documents()[i].id.cmp(&corpus.documents()[j].id))
    });
    let outliers = ranked
        .into_iter()
        .take(params.k)
        .enumerate()
        .map(|(rank, (i, f))| {
            let doc = &corpus.documents()[i];
            Outlier {
                rank: rank + 1,
                doc_id: doc.id.clone(),
                alpha: sol.alpha[i],
                label: y[i],
                f,
                title: snippet(doc),
                bounded: sol.alpha[i] >= bound,
            }
        })
        .collect();
    Ok(OutlierReport {
        category: category.to_string(),
        c: params.c,
        converged: sol.converged,
        outliers,
    })
}

/// `rank,doc_id,alpha,label,f,title`
pub fn write_outliers_csv<W: Write>(out: W, report: &OutlierReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "doc_id", "alpha", "label", "f", "title"])?;
    for o in &report.outliers {
        w.write_record([
            o.rank.to_string(),
            o.doc_id.clone(),
            sig(o.alpha, 9),
            o.label.to_string(),
            sig(o.f, 9),
            o.title.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveIn,
    MoveOut,
    Keep,
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "move_in" => Ok(Action::MoveIn),
            "move_out" => Ok(Action::MoveOut),
            "keep" => Ok(Action::Keep),
            _ => Err(Error::InvalidConfig(format!("unknown action {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelVerdict {
    pub doc_id: String,
    pub action: Action,
    #[serde(default)]
    pub note: String,
}

impl RelabelVerdict {
    pub fn new(doc_id: impl Into<String>, action: Action) -> Self {
        RelabelVerdict {
            doc_id: doc_id.into(),
            action,
            note: String::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MovementSummary {
    pub moved_in: usize,
    pub moved_out: usize,
    /// `keep` verdicts plus moves that were already in effect.
    pub kept: usize,
    pub positives_before: usize,
    pub positives_after: usize,
    pub total: usize,
    pub positive_rate: f64,
}

/// Applies human verdicts to `category` membership and returns the new
/// corpus. The whole batch is rejected if any id is unknown or if one id
/// receives two different actions.
pub fn apply_verdicts(corpus: &Corpus, verdicts: &[RelabelVerdict], category: &str) -> Result<(Corpus, MovementSummary)> {
    let mut actions: HashMap<&str, Action> = HashMap::with_capacity(verdicts.len());
    for v in verdicts {
        if corpus.get(&v.doc_id).is_none() {
            return Err(Error::UnknownDocument(v.doc_id.clone()));
        }
        if let Some(prev) = actions.insert(&v.doc_id, v.action) {
            if prev != v.action {
                return Err(Error::ContradictoryVerdicts(v.doc_id.clone()));
            }
        }
    }
    let positives_before = corpus.positives(category);
    let mut summary = MovementSummary {
        positives_before,
        total: corpus.len(),
        ..MovementSummary::default()
    };
    let docs: Vec<Document> = corpus
        .iter()
        .map(|doc| {
            let Some(&action) = actions.get(doc.id.as_str()) else {
                return doc.clone();
            };
            let mut doc = doc.clone();
            let member = doc.has_label(category);
            match action {
                Action::MoveIn if !member => {
                    doc.labels.insert(category.to_string());
                    summary.moved_in += 1;
                }
                Action::MoveOut if member => {
                    doc.labels.remove(category);
                    summary.moved_out += 1;
                }
                _ => summary.kept += 1,
            }
            doc
        })
        .collect();
    summary.positives_after = positives_before + summary.moved_in - summary.moved_out;
    summary.positive_rate = if summary.total == 0 {
        0.0
    } else {
        summary.positives_after as f64 / summary.total as f64
    };
    Ok((Corpus::new(docs)?, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanLoopStatus {
    pub category: String,
    pub rounds: usize,
    pub moved_in: usize,
    pub moved_out: usize,
    pub baseline_positives: usize,
    pub baseline_rate: f64,
    pub positives: usize,
    pub positive_rate: f64,
    /// `|α|` mass of the current top outliers; absent when the category is
    /// not trainable.
    pub outlier_alpha_mass: Option<f64>,
}

/// Replays verdict batches over `corpus` and reports the cumulative
/// movement and the current outlier mass.
pub fn clean_loop_status(
    corpus: &Corpus,
    category: &str,
    history: &[Vec<RelabelVerdict>],
    featurizer: &Featurizer,
    params: &OutlierParams,
) -> Result<CleanLoopStatus> {
    let total = corpus.len().max(1) as f64;
    let baseline_positives = corpus.positives(category);
    let mut current = corpus.clone();
    let (mut moved_in, mut moved_out) = (0, 0);
    for batch in history {
        let (next, s) = apply_verdicts(&current, batch, category)?;
        moved_in += s.moved_in;
        moved_out += s.moved_out;
        current = next;
    }
    let outlier_alpha_mass = match find_outliers(&current, featurizer, category, params) {
        Ok(r) => Some(r.alpha_mass()),
        Err(Error::CategoryTooSmall { .. }) => None,
        Err(e) => return Err(e),
    };
    let positives = current.positives(category);
    Ok(CleanLoopStatus {
        category: category.to_string(),
        rounds: history.len(),
        moved_in,
        moved_out,
        baseline_positives,
        baseline_rate: baseline_positives as f64 / total,
        positives,
        positive_rate: positives as f64 / total,
        outlier_alpha_mass,
    })
}

/// One line of the verdict audit log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub doc_id: String,
    pub action: Action,
    #[serde(default)]
    pub note: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub actor: String,
    pub category: String,
    #[serde(default)]
    pub batch: u64,
}

impl VerdictRecord {
    pub fn verdict(&self) -> RelabelVerdict {
        RelabelVerdict {
            doc_id: self.doc_id.clone(),
            action: self.action,
            note: self.note.clone(),
        }
    }
}

/// Append-only JSON-lines file of verdicts.
#[derive(Clone, Debug)]
pub struct VerdictLog {
    path: PathBuf,
}

impl VerdictLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        VerdictLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read(&self) -> Result<Vec<VerdictRecord>> {
        let file = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.path, e)),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }

    /// Appends one batch under a fresh batch number and returns the records.
    pub fn append(&self, category: &str, verdicts: &[RelabelVerdict], actor: &str) -> Result<Vec<VerdictRecord>> {
        let batch = self.read()?.iter().map(|r| r.batch).max().map_or(1, |b| b + 1);
        let timestamp = humantime::format_rfc3339_seconds(SystemTime::now()).to_string();
        let records: Vec<VerdictRecord> = verdicts
            .iter()
            .map(|v| VerdictRecord {
                doc_id: v.doc_id.clone(),
                action: v.action,
                note: v.note.clone(),
                timestamp: timestamp.clone(),
                actor: actor.to_string(),
                category: category.to_string(),
                batch,
            })
            .collect();
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        Ok(records)
    }

    /// Verdict batches for `category` in log order.
    pub fn history(&self, category: &str) -> Result<Vec<Vec<RelabelVerdict>>> {
        let mut batches: BTreeMap<u64, Vec<RelabelVerdict>> = BTreeMap::new();
        for r in self.read()?.into_iter().filter(|r| r.category == category) {
            batches.entry(r.batch).or_default().push(r.verdict());
        }
        Ok(batches.into_values().collect())
    }

    /// Re-applies every logged batch to `corpus`, in batch order.
    pub fn replay(&self, corpus: &Corpus) -> Result<Corpus> {
        let mut batches: BTreeMap<u64, (String, Vec<RelabelVerdict>)> = BTreeMap::new();
        for r in self.read()? {
            let entry = batches.entry(r.batch).or_insert_with(|| (r.category.clone(), Vec::new()));
            entry.1.push(r.verdict());
        }
        let mut current = corpus.clone();
        for (category, verdicts) in batches.values() {
            current = apply_verdicts(&current, verdicts, category)?.0;
        }
        Ok(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `n` documents of which the first `positives` carry `q-bio`.
    fn labeled(n: usize, positives: usize) -> Corpus {
        let docs = (0..n)
            .map(|i| {
                let d = Document::new(format!("d{i}"), format!("title {i}"), "");
                if i < positives {
                    d.with_labels(["q-bio", "other"])
                } else {
                    d.with_labels(["other"])
                }
            })
            .collect();
        Corpus::new(docs).unwrap()
    }

    #[test]
    fn net_movement_arithmetic() {
        let corpus = labeled(5565, 466);
        let mut verdicts: Vec<RelabelVerdict> = (466..476).map(|i| RelabelVerdict::new(format!("d{i}"), Action::MoveIn)).collect();
        verdicts.extend((0..15).map(|i| RelabelVerdict::new(format!("d{i}"), Action::MoveOut)));
        let (after, s) = apply_verdicts(&corpus, &verdicts, "q-bio").unwrap();
        assert_eq!((s.moved_in, s.moved_out, s.positives_after), (10, 15, 461));
        assert_eq!(after.positives("q-bio"), 461);
        assert_eq!(format!("{:.1}", 100.0 * s.positive_rate), "8.3");
        assert_eq!(corpus.positives("q-bio"), 466);
        assert_eq!(after.positives("other"), 5565);
    }

    #[test]
    fn keep_and_noop_moves() {
        let corpus = labeled(10, 3);
        let verdicts = [
            RelabelVerdict::new("d0", Action::MoveIn),
            RelabelVerdict::new("d5", Action::Keep),
            RelabelVerdict::new("d7", Action::MoveOut),
        ];
        let (after, s) = apply_verdicts(&corpus, &verdicts, "q-bio").unwrap();
        assert_eq!(after, corpus);
        assert_eq!((s.moved_in, s.moved_out, s.kept), (0, 0, 3));
    }

    #[test]
    fn batch_errors() {
        let corpus = labeled(10, 3);
        let unknown = [RelabelVerdict::new("zz", Action::Keep)];
        assert!(matches!(apply_verdicts(&corpus, &unknown, "q-bio"), Err(Error::UnknownDocument(id)) if id == "zz"));
        let clash = [RelabelVerdict::new("d1", Action::Keep), RelabelVerdict::new("d1", Action::MoveOut)];
        assert!(matches!(apply_verdicts(&corpus, &clash, "q-bio"), Err(Error::ContradictoryVerdicts(id)) if id == "d1"));
        let repeat = [RelabelVerdict::new("d1", Action::MoveOut), RelabelVerdict::new("d1", Action::MoveOut)];
        assert_eq!(apply_verdicts(&corpus, &repeat, "q-bio").unwrap().1.moved_out, 1);
    }

    #[test]
    fn verdict_json_shape() {
        let v: RelabelVerdict = serde_json::from_str(r#"{"doc_id":"x","action":"move_in"}"#).unwrap();
        assert_eq!(v, RelabelVerdict::new("x", Action::MoveIn));
        assert!(serde_json::from_str::<RelabelVerdict>(r#"{"doc_id":"x","action":"flip"}"#).is_err());
    }

    #[test]
    fn log_batches() {
        let dir = tempfile::tempdir().unwrap();
        let log = VerdictLog::new(dir.path().join("verdicts.jsonl"));
        assert!(log.history("q-bio").unwrap().is_empty());
        log.append("q-bio", &[RelabelVerdict::new("a", Action::MoveIn)], "op").unwrap();
        log.append("other", &[RelabelVerdict::new("c", Action::Keep)], "op").unwrap();
        let recs = log
            .append("q-bio", &[RelabelVerdict::new("b", Action::MoveOut), RelabelVerdict::new("c", Action::Keep)], "op")
            .unwrap();
        assert_eq!(recs[0].batch, 3);
        let history = log.history("q-bio").unwrap();
        assert_eq!(history.len(), 2);
        assert_eq!(history[1].len(), 2);
        let line = std::fs::read_to_string(log.path()).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        for key in ["doc_id", "action", "note", "timestamp", "actor"] {
            assert!(first.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn replay_applies_batches_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let log = VerdictLog::new(dir.path().join("verdicts.jsonl"));
        let corpus = labeled(10, 3);
        assert_eq!(log.replay(&corpus).unwrap(), corpus);
        log.append("q-bio", &[RelabelVerdict::new("d5", Action::MoveIn)], "op").unwrap();
        log.append("q-bio", &[RelabelVerdict::new("d5", Action::MoveOut), RelabelVerdict::new("d0", Action::MoveOut)], "op")
            .unwrap();
        log.append("other", &[RelabelVerdict::new("d9", Action::MoveOut)], "op").unwrap();
        let replayed = log.replay(&corpus).unwrap();
        assert_eq!(replayed.positives("q-bio"), 2);
        assert!(!replayed.get("d5").unwrap().has_label("q-bio"));
        assert!(!replayed.get("d9").unwrap().has_label("other"));
    }
}
