//! Text serialization of [`ModelBundle`].
//!
//! ```text
//! corpusmap-bundle 1
//! config {"df_threshold":2,...}
//! lexicon-checksum <sha256>
//! categories <name> <name> ...
//! skipped <name>:<positives> ...
//! [stoplist]
//! [phrases]
//! [lexicon]
//! [idf]
//! [model <name> <trained_on> <positives> <lexicon sha256>]
//! <name> <C> <b> <margin> <converged> <A> <B>
//! <idx>:<weight> <idx>:<weight> ...
//! checksum <sha256 of every preceding byte>
//! ```
//!
//! Floating-point values are written with 17 significant digits and read back
//! bit-exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{CategoryModel, ModelBundle, SkippedCategory, TrainConfig};
use crate::calibration::SigmoidCalibration;
use crate::error::BundleError;
use crate::fmt::exact;
use crate::qp_svm::Hyperplane;
use crate::textpipe::{Analyzer, Lexicon, PhraseList, Stoplist};
use crate::vectorizer::{Featurizer, IdfTable, SparseVector};
use crate::{Error, Result};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "corpusmap-bundle";
const CHECKSUM_PREFIX: &str = "checksum ";

fn digest(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

/// Appends the trailing checksum line to a bundle body.
pub fn seal_bundle_text(body: &str) -> String {
    format!("{body}{CHECKSUM_PREFIX}{}\n", digest(body))
}

impl ModelBundle {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let lexicon_text = self.lexicon().to_text();
        let _ = writeln!(out, "{MAGIC} {BUNDLE_FORMAT_VERSION}");
        let _ = writeln!(out, "config {config}");
        let _ = writeln!(out, "lexicon-checksum {}", self.lexicon().checksum());
        let names: Vec<&str> = self.categories().collect();
        let _ = writeln!(out, "categories {}", names.join(" "));
        let skipped: Vec<String> = self.skipped.iter().map(|s| format!("{}:{}", s.category, s.positives)).collect();
        let _ = writeln!(out, "skipped {}", skipped.join(" "));

        out.push_str("[stoplist]\n");
        for w in self.featurizer.analyzer.stoplist.sorted_words() {
            let _ = writeln!(out, "{w}");
        }
        out.push_str("[phrases]\n");
        out.push_str(&self.featurizer.analyzer.phrases.to_text());
        out.push_str("[lexicon]\n");
        out.push_str(&lexicon_text);
        out.push_str("[idf]\n");
        for v in self.featurizer.idf.values() {
            let _ = writeln!(out, "{}", exact(*v));
        }
        for m in self.models.values() {
            let h = &m.hyperplane;
            let _ = writeln!(out, "[model {} {} {} {}]", m.category, m.trained_on, m.positives, m.lexicon_hash);
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                m.category,
                exact(m.c),
                exact(h.b),
                exact(h.margin),
                m.converged,
                exact(m.calibration.a),
                exact(m.calibration.b)
            );
            let pairs: Vec<String> = h.w.entries().iter().map(|(i, v)| format!("{i}:{}", exact(*v))).collect();
            let _ = writeln!(out, "{}", pairs.join(" "));
        }
        seal_bundle_text(&out)
    }

    /// Parses a bundle, checking the format version, the whole-file checksum
    /// and that every model was trained against the stored lexicon.
    pub fn from_text(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    bundle.save(path)
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    ModelBundle::load(path)
}

fn malformed(line: usize, message: impl Into<String>) -> Error {
    Error::Bundle(BundleError::Malformed {
        line,
        message: message.into(),
    })
}

fn float(line: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| malformed(line, format!("bad number {s:?}")))
}

/// Line cursor with 1-based numbering.
struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let line = self.lines.get(self.pos).ok_or_else(|| malformed(self.pos + 1, "unexpected end of bundle"))?;
        self.pos += 1;
        Ok((self.pos, line))
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next()?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' ').or((r.is_empty()).then_some("")))
            .ok_or_else(|| malformed(n, format!("expected `{key}`")))?;
        Ok((n, rest))
    }

    /// Lines up to the next `[` header (or end), with the number of the first.
    fn section(&mut self, header: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next()?;
        if line != header {
            return Err(malformed(n, format!("expected {header}")));
        }
        let start = self.pos;
        while self.pos < self.lines.len() && !self.lines[self.pos].starts_with('[') {
            self.pos += 1;
        }
        Ok((start + 1, self.lines[start..self.pos].to_vec()))
    }

    fn done(&self) -> bool {
        self.pos >= self.lines.len()
    }
}

fn parse(text: &str) -> Result<ModelBundle> {
    let first = text.lines().next().unwrap_or("");
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| malformed(1, format!("not a bundle (expected `{MAGIC} <version>`)")))?;
    if version.parse::<u32>().ok() != Some(BUNDLE_FORMAT_VERSION) {
        return Err(BundleError::VersionMismatch {
            found: version.to_string(),
            expected: BUNDLE_FORMAT_VERSION,
        }
        .into());
    }

    let body_end = text
        .rfind(CHECKSUM_PREFIX)
        .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
        .ok_or_else(|| malformed(text.lines().count(), "missing checksum line"))?;
    let (body, trailer) = text.split_at(body_end);
    let stored = trailer[CHECKSUM_PREFIX.len()..].trim().to_string();
    let computed = digest(body);
    if stored != computed {
        return Err(BundleError::ChecksumMismatch { stored, computed }.into());
    }

    let mut lines = Lines {
        lines: body.lines().collect(),
        pos: 1,
    };
    let (n, config) = lines.field("config")?;
    let config: TrainConfig = serde_json::from_str(config).map_err(|e| malformed(n, format!("config: {e}")))?;
    let (_, lexicon_hash) = lines.field("lexicon-checksum")?;
    let (_, categories) = lines.field("categories")?;
    let categories: Vec<&str> = categories.split_whitespace().collect();
    let (n, skipped_line) = lines.field("skipped")?;
    let skipped = skipped_line
        .split_whitespace()
        .map(|s| {
            let (c, p) = s.rsplit_once(':').ok_or_else(|| malformed(n, format!("bad skipped entry {s:?}")))?;
            let positives = p.parse().map_err(|_| malformed(n, format!("bad skipped entry {s:?}")))?;
            Ok(SkippedCategory {
                category: c.to_string(),
                positives,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (_, stop) = lines.section("[stoplist]")?;
    let stoplist = Stoplist::from_words(stop);
    let (n, phrases) = lines.section("[phrases]")?;
    let phrases = PhraseList::parse(&phrases.join("\n")).map_err(|e| match e {
        Error::Parse { line, message } => malformed(n + line - 1, message),
        e => e,
    })?;
    let (n, lex) = lines.section("[lexicon]")?;
    let lexicon = Lexicon::parse(&lex.join("\n")).map_err(|e| match e {
        Error::Parse { line, message } => malformed(n + line - 1, message),
        e => e,
    })?;
    if lexicon.checksum() != lexicon_hash {
        return Err(malformed(n, "lexicon does not match its recorded checksum"));
    }
    let (n, idf) = lines.section("[idf]")?;
    let idf = idf
        .iter()
        .enumerate()
        .map(|(i, s)| float(n + i, s))
        .collect::<Result<Vec<f64>>>()?;
    if idf.len() != lexicon.len() {
        return Err(malformed(n, format!("{} idf values for {} terms", idf.len(), lexicon.len())));
    }

    let mut models = BTreeMap::new();
    while !lines.done() {
        let (n, header) = lines.next()?;
        let fields: Vec<&str> = header
            .strip_prefix("[model ")
            .and_then(|h| h.strip_suffix(']'))
            .ok_or_else(|| malformed(n, "expected [model ...]"))?
            .split(' ')
            .collect();
        let [category, trained_on, positives, model_hash] = fields[..] else {
            return Err(malformed(n, "model header needs name, trained_on, positives, lexicon hash"));
        };
        if model_hash != lexicon_hash {
            return Err(BundleError::LexiconMismatch {
                category: category.to_string(),
            }
            .into());
        }
        let trained_on = trained_on.parse().map_err(|_| malformed(n, "bad trained_on"))?;
        let positives = positives.parse().map_err(|_| malformed(n, "bad positives"))?;

        let (n, params) = lines.next()?;
        let params: Vec<&str> = params.split(' ').collect();
        let [name, c, b, margin, converged, a, cal_b] = params[..] else {
            return Err(malformed(n, "expected `category C b margin converged A B`"));
        };
        if name != category {
            return Err(malformed(n, format!("model line names {name:?} under section {category:?}")));
        }
        let converged = converged.parse().map_err(|_| malformed(n, "bad converged flag"))?;

        let (n, weights) = lines.next()?;
        let entries = weights
            .split_whitespace()
            .map(|p| {
                let (i, v) = p.split_once(':').ok_or_else(|| malformed(n, format!("bad pair {p:?}")))?;
                Ok((i.parse::<u32>().map_err(|_| malformed(n, format!("bad index {i:?}")))?, float(n, v)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let w = SparseVector::new(entries, lexicon.len()).map_err(|e| malformed(n, e.to_string()))?;
        let mut hyperplane = Hyperplane::new(w, float(n - 1, b)?).map_err(|e| malformed(n, e.to_string()))?;
        hyperplane.margin = float(n - 1, margin)?;
        let model = CategoryModel {
            category: category.to_string(),
            c: float(n - 1, c)?,
            hyperplane,
            calibration: SigmoidCalibration::new(float(n - 1, a)?, float(n - 1, cal_b)?),
            converged,
            lexicon_hash: model_hash.to_string(),
            trained_on,
            positives,
        };
        if models.insert(category.to_string(), model).is_some() {
            return Err(malformed(n, format!("duplicate model {category:?}")));
        }
    }

    let listed: BTreeSet<&str> = categories.iter().copied().collect();
    if let Some(missing) = listed.iter().find(|c| !models.contains_key(**c)) {
        return Err(BundleError::MissingCategory(missing.to_string()).into());
    }
    if let Some(extra) = models.keys().find(|c| !listed.contains(c.as_str())) {
        return Err(malformed(0, format!("model {extra:?} not listed in categories")));
    }

    let featurizer = Featurizer {
        analyzer: Analyzer::new(stoplist, phrases),
        lexicon,
        idf: IdfTable::from_values(idf),
        weighting: config.weighting,
    };
    Ok(ModelBundle {
        featurizer,
        models,
        skipped,
        config,
    })
}
