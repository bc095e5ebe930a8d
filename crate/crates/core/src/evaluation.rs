//! Confusion metrics, recall/precision against category size, weighting and
//! threshold ablations, and time-bucketed category trends.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{train_all, ModelBundle, PredictMode, TrainConfig};
use crate::corpus::{Corpus, YearMonth};
use crate::fmt::sig;
use crate::textpipe::Analyzer;
use crate::vectorizer::Weighting;
use crate::{Error, Result};

/// Confusion counts for one category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `TP/(TP+FP)`, or 1 when nothing was retrieved.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `TP/(TP+FN)`, or 1 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Accuracy of predicting every document negative.
    pub fn null_accuracy(&self) -> f64 {
        ratio(self.fp + self.tn, self.total())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: String,
    /// Positive documents the model was trained on.
    pub size: usize,
    #[serde(flatten)]
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub null_accuracy: f64,
    /// Set when `TP + FP = 0`; precision is then reported as 1.
    pub no_retrievals: bool,
}

impl CategoryMetrics {
    pub fn new(category: impl Into<String>, size: usize, confusion: Confusion) -> Self {
        CategoryMetrics {
            category: category.into(),
            size,
            confusion,
            precision: confusion.precision(),
            recall: confusion.recall(),
            accuracy: confusion.accuracy(),
            f1: confusion.f1(),
            null_accuracy: confusion.null_accuracy(),
            no_retrievals: confusion.tp + confusion.fp == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub categories: Vec<CategoryMetrics>,
}

impl MetricsReport {
    pub fn get(&self, category: &str) -> Option<&CategoryMetrics> {
        self.categories.iter().find(|m| m.category == category)
    }

    pub fn macro_accuracy(&self) -> f64 {
        mean(self.categories.iter().map(|m| m.accuracy))
    }

    pub fn macro_f1(&self) -> f64 {
        mean(self.categories.iter().map(|m| m.f1))
    }

    pub fn macro_precision(&self) -> f64 {
        mean(self.categories.iter().map(|m| m.precision))
    }

    pub fn macro_recall(&self) -> f64 {
        mean(self.categories.iter().map(|m| m.recall))
    }

    /// One `(size, recall, precision)` point per category, ascending by size.
    pub fn size_curve(&self) -> Vec<SizePoint> {
        let mut points: Vec<SizePoint> = self
            .categories
            .iter()
            .map(|m| SizePoint {
                category: m.category.clone(),
                size: m.size,
                recall: m.recall,
                precision: m.precision,
            })
            .collect();
        points.sort_by(|a, b| a.size.cmp(&b.size).then_with(|| a.category.cmp(&b.category)));
        points
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores every test document against every model and tallies confusion
/// counts against the gold labels.
pub fn evaluate(bundle: &ModelBundle, test: &Corpus, mode: PredictMode) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::InvalidConfig("test corpus is empty".into()));
    }
    let names: Vec<&str> = bundle.categories().collect();
    let counts = test
        .documents()
        .par_iter()
        .fold(
            || vec![Confusion::default(); names.len()],
            |mut acc, doc| {
                let preds = bundle.predict(doc, mode);
                for (slot, name) in acc.iter_mut().zip(&names) {
                    slot.record(preds[*name].label > 0, doc.has_label(name));
                }
                acc
            },
        )
        .reduce(
            || vec![Confusion::default(); names.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.tp += y.tp;
                    x.fp += y.fp;
                    x.fn_ += y.fn_;
                    x.tn += y.tn;
                }
                a
            },
        );
    let categories = names
        .iter()
        .zip(counts)
        .map(|(name, c)| CategoryMetrics::new(*name, bundle.models[*name].positives, c))
        .collect();
    Ok(MetricsReport { categories })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub category: String,
    pub size: usize,
    pub recall: f64,
    pub precision: f64,
}

/// Calibrated-prediction recall and precision per category, ascending by
/// training-set category size.
pub fn size_curve(bundle: &ModelBundle, test: &Corpus) -> Result<Vec<SizePoint>> {
    Ok(evaluate(bundle, test, PredictMode::Calibrated)?.size_curve())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    #[default]
    Year,
    Month,
}

impl std::str::FromStr for Bucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "year" => Ok(Bucket::Year),
            "month" => Ok(Bucket::Month),
            _ => Err(Error::InvalidConfig(format!("bucket must be `year` or `month`, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub period: String,
    pub total: usize,
    pub positive: usize,
    pub percent: f64,
}

impl TrendRow {
    fn new(period: String, total: usize, positive: usize) -> Self {
        let percent = if total == 0 { 0.0 } else { 100.0 * positive as f64 / total as f64 };
        TrendRow {
            period,
            total,
            positive,
            percent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub category: String,
    pub bucket: Bucket,
    /// Chronological, covering every period from the earliest to the latest
    /// dated document (empty periods included).
    pub rows: Vec<TrendRow>,
    /// Documents without a date, if any.
    pub undated: Option<TrendRow>,
}

impl TrendReport {
    /// Positive percentage over all documents, undated included.
    pub fn overall_percent(&self) -> f64 {
        let (t, p) = self
            .rows
            .iter()
            .chain(&self.undated)
            .fold((0, 0), |(t, p), r| (t + r.total, p + r.positive));
        TrendRow::new(String::new(), t, p).percent
    }
}

/// Classifies every document of `corpus` into `category` (calibrated
/// decision) and tallies predicted positives per period.
pub fn trend(bundle: &ModelBundle, corpus: &Corpus, category: &str, bucket: Bucket) -> Result<TrendReport> {
    let model = bundle.model(category)?;
    let predicted: Vec<bool> = corpus
        .documents()
        .par_iter()
        .map(|d| {
            let x = bundle.vectorize(d);
            model.predict_vector(&x, PredictMode::Calibrated).map(|p| p.label > 0)
        })
        .collect::<Result<_>>()?;
    let key = |ym: YearMonth| match bucket {
        Bucket::Year => YearMonth { year: ym.year, month: 1 },
        Bucket::Month => ym,
    };
    let mut dated: BTreeMap<YearMonth, (usize, usize)> = BTreeMap::new();
    let mut undated = (0, 0);
    for (doc, &pos) in corpus.iter().zip(&predicted) {
        let slot = match doc.date {
            Some(d) => dated.entry(key(d)).or_default(),
            None => &mut undated,
        };
        slot.0 += 1;
        slot.1 += pos as usize;
    }
    let mut rows = Vec::new();
    if let (Some(&first), Some(&last)) = (dated.keys().next(), dated.keys().next_back()) {
        let mut period = first;
        while period <= last {
            let (t, p) = dated.get(&period).copied().unwrap_or_default();
            let label = match bucket {
                Bucket::Year => period.year.to_string(),
                Bucket::Month => period.to_string(),
            };
            rows.push(TrendRow::new(label, t, p));
            period = match bucket {
                Bucket::Year => YearMonth {
                    year: period.year + 1,
                    month: 1,
                },
                Bucket::Month => period.succ(),
            };
        }
    }
    Ok(TrendReport {
        category: category.to_string(),
        bucket,
        rows,
        undated: (undated.0 > 0).then(|| TrendRow::new("undated".into(), undated.0, undated.1)),
    })
}

/// Settings swept by [`ablate`]; every combination is one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub weightings: Vec<Weighting>,
    pub df_thresholds: Vec<u32>,
    pub cs: Vec<f64>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid {
            weightings: vec![Weighting::Tf, Weighting::TfIdf],
            df_thresholds: vec![2, 5],
            cs: vec![1.0],
        }
    }
}

impl AblationGrid {
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &weighting in &self.weightings {
            for &df_threshold in &self.df_thresholds {
                for &c in &self.cs {
                    out.push(TrainConfig {
                        weighting,
                        df_threshold,
                        c,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub weighting: Weighting,
    pub df_threshold: u32,
    pub c: f64,
    pub lexicon_size: usize,
    /// Macro averages over the trained categories.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Trains on `train` and evaluates on `test` for every grid configuration.
pub fn ablate(
    train: &Corpus,
    test: &Corpus,
    analyzer: &Analyzer,
    base: &TrainConfig,
    grid: &AblationGrid,
) -> Result<Vec<AblationRow>> {
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(Error::InvalidConfig("ablation grid is empty".into()));
    }
    configs
        .iter()
        .map(|config| {
            let bundle = train_all(train, analyzer, config)?;
            let report = evaluate(&bundle, test, PredictMode::Calibrated)?;
            Ok(AblationRow {
                weighting: config.weighting,
                df_threshold: config.df_threshold,
                c: config.c,
                lexicon_size: bundle.lexicon().len(),
                accuracy: report.macro_accuracy(),
                precision: report.macro_precision(),
                recall: report.macro_recall(),
                f1: report.macro_f1(),
            })
        })
        .collect()
}

const DIGITS: usize = 6;

/// `category,size,tp,fp,fn,tn,precision,recall,accuracy,f1`
pub fn write_metrics_csv<W: Write>(out: W, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "size", "tp", "fp", "fn", "tn", "precision", "recall", "accuracy", "f1"])?;
    for m in &report.categories {
        let c = m.confusion;
        w.write_record([
            m.category.clone(),
            m.size.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            sig(m.precision, DIGITS),
            sig(m.recall, DIGITS),
            sig(m.accuracy, DIGITS),
            sig(m.f1, DIGITS),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `period,total,positive,percent`; the undated bucket, if any, comes last.
pub fn write_trend_csv<W: Write>(out: W, report: &TrendReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period", "total", "positive", "percent"])?;
    for r in report.rows.iter().chain(&report.undated) {
        w.write_record([r.period.clone(), r.total.to_string(), r.positive.to_string(), sig(r.percent, DIGITS)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `weighting,df_threshold,c,lexicon_size,accuracy,precision,recall,f1`
pub fn write_ablation_csv<W: Write>(out: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["weighting", "df_threshold", "c", "lexicon_size", "accuracy", "precision", "recall", "f1"])?;
    for r in rows {
        w.write_record([
            r.weighting.to_string(),
            r.df_threshold.to_string(),
            sig(r.c, DIGITS),
            r.lexicon_size.to_string(),
            sig(r.accuracy, DIGITS),
            sig(r.precision, DIGITS),
            sig(r.recall, DIGITS),
            sig(r.f1, DIGITS),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Whitespace-separated `size recall precision` columns for gnuplot.
pub fn write_size_curve_dat<W: Write>(mut out: W, points: &[SizePoint]) -> std::io::Result<()> {
    writeln!(out, "# size recall precision category")?;
    for p in points {
        writeln!(out, "{} {} {} {}", p.size, sig(p.recall, DIGITS), sig(p.precision, DIGITS), p.category)?;
    }
    Ok(())
}

/// Whitespace-separated `period total positive percent` columns for gnuplot
/// (dated buckets only).
pub fn write_trend_dat<W: Write>(mut out: W, report: &TrendReport) -> std::io::Result<()> {
    writeln!(out, "# period total positive percent")?;
    for r in &report.rows {
        writeln!(out, "{} {} {} {}", r.period, r.total, r.positive, sig(r.percent, DIGITS))?;
    }
    Ok(())
}
