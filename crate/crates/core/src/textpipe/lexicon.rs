use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{Analyzer, PhraseList, Stoplist, Token};
use crate::corpus::Corpus;
use crate::{Error, Result};

/// Term ↔ feature-index map with per-term document frequencies.
///
/// Terms are ordered by descending document frequency, ties broken
/// lexicographically; the feature index of a term is its position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    terms: Vec<Token>,
    df: Vec<u32>,
    index: HashMap<Token, u32>,
    n_docs: u32,
    df_threshold: u32,
}

impl Lexicon {
    /// Keeps every token whose document frequency reaches `df_threshold`.
    pub fn from_frequencies(frequencies: HashMap<Token, u32>, n_docs: u32, df_threshold: u32) -> Result<Self> {
        if df_threshold == 0 {
            return Err(Error::InvalidConfig("df_threshold must be at least 1".into()));
        }
        let mut kept: Vec<(Token, u32)> = frequencies.into_iter().filter(|(_, df)| *df >= df_threshold).collect();
        if kept.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        if let Some((t, df)) = kept.iter().find(|(_, df)| *df > n_docs) {
            return Err(Error::InvalidConfig(format!("df({t}) = {df} exceeds n_docs = {n_docs}")));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (terms, df): (Vec<Token>, Vec<u32>) = kept.into_iter().unzip();
        let index = terms.iter().cloned().enumerate().map(|(i, t)| (t, i as u32)).collect();
        Ok(Lexicon {
            terms,
            df,
            index,
            n_docs,
            df_threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Token] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &Token {
        &self.terms[index]
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn df(&self, index: usize) -> u32 {
        self.df[index]
    }

    pub fn dfs(&self) -> &[u32] {
        &self.df
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn df_threshold(&self) -> u32 {
        self.df_threshold
    }

    /// `n_docs df_threshold` header, then `token df` per line in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 * self.terms.len() + 16);
        let _ = writeln!(out, "{} {}", self.n_docs, self.df_threshold);
        for (t, df) in self.terms.iter().zip(&self.df) {
            let _ = writeln!(out, "{t} {df}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: String| Error::Parse { line: line + 1, message };
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header".into()))?;
        let header: Vec<&str> = header.split_whitespace().collect();
        let [n_docs, df_threshold] = header[..] else {
            return Err(bad(0, "header must be `n_docs df_threshold`".into()));
        };
        let n_docs: u32 = n_docs.parse().map_err(|e| bad(0, format!("n_docs: {e}")))?;
        let df_threshold: u32 = df_threshold.parse().map_err(|e| bad(0, format!("df_threshold: {e}")))?;
        let mut terms = Vec::new();
        let mut df = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (tok, count) = line.split_once(' ').ok_or_else(|| bad(i, "expected `token df`".into()))?;
            let tok = Token::new(tok).ok_or_else(|| bad(i, format!("invalid token {tok:?}")))?;
            let count: u32 = count.trim().parse().map_err(|e| bad(i, format!("df: {e}")))?;
            if count < df_threshold || count > n_docs || count == 0 {
                return Err(bad(i, format!("df {count} outside [{df_threshold}, {n_docs}]")));
            }
            if index.insert(tok.clone(), terms.len() as u32).is_some() {
                return Err(bad(i, format!("duplicate token {tok}")));
            }
            terms.push(tok);
            df.push(count);
        }
        if terms.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(Lexicon {
            terms,
            df,
            index,
            n_docs,
            df_threshold,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// SHA-256 of the serialized lexicon, hex encoded. Models carry it so a
    /// weight vector is never applied against a different feature indexing.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Number of documents containing each token (each document counted once).
pub fn document_frequencies(corpus: &Corpus, analyzer: &Analyzer) -> HashMap<Token, u32> {
    corpus
        .documents()
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<Token, u32>, doc| {
            let unique: HashSet<Token> = analyzer.tokenize(doc).into_iter().collect();
            for t in unique {
                *acc.entry(t).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (t, c) in b {
                *a.entry(t).or_default() += c;
            }
            a
        })
}

/// Builds the corpus lexicon, dropping tokens found in fewer than
/// `df_threshold` documents.
pub fn build_lexicon(corpus: &Corpus, phrases: &PhraseList, stoplist: &Stoplist, df_threshold: u32) -> Result<Lexicon> {
    if corpus.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    let analyzer = Analyzer::new(stoplist.clone(), phrases.clone());
    Lexicon::from_frequencies(document_frequencies(corpus, &analyzer), corpus.len() as u32, df_threshold)
}
