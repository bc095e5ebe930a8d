//! Sparse TF / TF×IDF document vectors.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::fmt::sig;
use crate::textpipe::{Analyzer, Lexicon, Token};
use crate::{Error, Result};

/// Index/value pairs over a fixed dimension. Indices are strictly
/// increasing and values nonzero.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn new(mut entries: Vec<(u32, f64)>, dim: usize) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidConfig("duplicate index in sparse vector".into()));
        }
        if let Some(&(i, _)) = entries.last() {
            if i as usize >= dim {
                return Err(Error::DimensionMismatch {
                    left: i as usize + 1,
                    right: dim,
                });
            }
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite sparse vector value".into()));
        }
        Ok(SparseVector { entries, dim })
    }

    /// Builds from a dense slice, dropping zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
            dim: values.len(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector { entries: Vec::new(), dim }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// True for the all-zero vector (e.g. a document with no lexicon terms).
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Sparse inner product by merging the two index lists.
    pub fn dot(&self, other: &SparseVector) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(acc)
    }

    /// Inner product with a dense vector of at least `self.dim` entries.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i as usize]).sum()
    }

    /// Adds `scale · self` into `dense`.
    pub fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        for &(i, v) in &self.entries {
            dense[i as usize] += scale * v;
        }
    }

    /// Scales to unit L2 norm; the zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for e in &mut self.entries {
                e.1 /= norm;
            }
        }
        self
    }

    /// `idx:val` pairs with 9 significant digits.
    pub fn to_pairs_string(&self) -> String {
        self.entries
            .iter()
            .map(|&(i, v)| format!("{i}:{}", sig(v, 9)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Free-function form of [`SparseVector::dot`].
pub fn dot(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    a.dot(b)
}

/// Per-feature inverse document frequencies aligned with a lexicon.
#[derive(Clone, Debug, PartialEq)]
pub struct IdfTable {
    idf: Vec<f64>,
}

impl IdfTable {
    pub fn from_values(idf: Vec<f64>) -> Self {
        IdfTable { idf }
    }

    pub fn values(&self) -> &[f64] {
        &self.idf
    }

    pub fn get(&self, index: usize) -> f64 {
        self.idf[index]
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }
}

/// `idf(t) = ln(n_docs / df(t))`.
pub fn compute_idf(lexicon: &Lexicon) -> Result<IdfTable> {
    compute_idf_with(lexicon, f64::ln)
}

/// IDF with an arbitrary logarithm base. Normalized TF×IDF vectors do not
/// depend on the base.
pub fn compute_idf_base(lexicon: &Lexicon, base: f64) -> Result<IdfTable> {
    if !(base > 0.0 && base != 1.0) {
        return Err(Error::InvalidConfig(format!("invalid logarithm base {base}")));
    }
    compute_idf_with(lexicon, |x| x.log(base))
}

fn compute_idf_with(lexicon: &Lexicon, log: impl Fn(f64) -> f64) -> Result<IdfTable> {
    let n = lexicon.n_docs();
    if n == 0 {
        return Err(Error::InvalidConfig("lexicon built from zero documents".into()));
    }
    let idf = lexicon
        .dfs()
        .iter()
        .enumerate()
        .map(|(i, &df)| {
            if df == 0 || df > n {
                Err(Error::InvalidConfig(format!(
                    "document frequency {df} of {} outside [1, {n}]",
                    lexicon.term(i)
                )))
            } else {
                Ok(log(n as f64 / df as f64))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdfTable { idf })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Weighting {
    /// Raw term counts.
    #[serde(rename = "tf", alias = "TF")]
    Tf,
    /// Term counts scaled by inverse document frequency.
    #[default]
    #[serde(rename = "tfidf", alias = "TFIDF")]
    TfIdf,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "tf" => Ok(Weighting::Tf),
            "tfidf" | "tf-idf" => Ok(Weighting::TfIdf),
            other => Err(format!("unknown weighting {other:?} (expected tf or tfidf)")),
        }
    }
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Weighting::Tf => "tf",
            Weighting::TfIdf => "tfidf",
        })
    }
}

/// Maps a token list to a unit-length vector. Tokens outside the lexicon are
/// dropped; if nothing with nonzero weight remains the zero vector is
/// returned.
pub fn vectorize(tokens: &[Token], lexicon: &Lexicon, idf: &IdfTable, weighting: Weighting) -> SparseVector {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for t in tokens {
        if let Some(i) = lexicon.index_of(t.as_str()) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(i, tf)| {
            let w = match weighting {
                Weighting::Tf => tf as f64,
                Weighting::TfIdf => tf as f64 * idf.get(i as usize),
            };
            (i, w)
        })
        .filter(|&(_, w)| w != 0.0)
        .collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    SparseVector {
        entries,
        dim: lexicon.len(),
    }
    .normalized()
}

/// Everything needed to turn a raw document into its feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Featurizer {
    pub analyzer: Analyzer,
    pub lexicon: Lexicon,
    pub idf: IdfTable,
    pub weighting: Weighting,
}

impl Featurizer {
    pub fn new(analyzer: Analyzer, lexicon: Lexicon, weighting: Weighting) -> Result<Self> {
        let idf = compute_idf(&lexicon)?;
        Ok(Featurizer {
            analyzer,
            lexicon,
            idf,
            weighting,
        })
    }

    /// Builds the lexicon from `corpus` and wraps it.
    pub fn fit(corpus: &Corpus, analyzer: Analyzer, df_threshold: u32, weighting: Weighting) -> Result<Self> {
        let lexicon = crate::textpipe::build_lexicon(corpus, &analyzer.phrases, &analyzer.stoplist, df_threshold)?;
        Self::new(analyzer, lexicon, weighting)
    }

    pub fn dim(&self) -> usize {
        self.lexicon.len()
    }

    pub fn vectorize(&self, doc: &Document) -> SparseVector {
        vectorize(&self.analyzer.tokenize(doc), &self.lexicon, &self.idf, self.weighting)
    }

    pub fn vectorize_corpus(&self, corpus: &Corpus) -> Vec<SparseVector> {
        use rayon::prelude::*;
        corpus.documents().par_iter().map(|d| self.vectorize(d)).collect()
    }
}

/// Writes `doc_id idx:val idx:val ...` lines.
pub fn write_vector_dump<'a, W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = (&'a str, &'a SparseVector)>,
) -> std::io::Result<()> {
    for (id, v) in rows {
        if v.is_zero() {
            writeln!(out, "{id}")?;
        } else {
            writeln!(out, "{id} {}", v.to_pairs_string())?;
        }
    }
    Ok(())
}
