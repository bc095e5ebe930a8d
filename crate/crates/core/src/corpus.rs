//! Labeled document collections: loading, label binarization and
//! stratified splitting.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id":"0301001","title":"...","abstract":"...","authors":["Y. Togashi"],"labels":["q-bio"],"date":"2003-01"}
//! ```
//!
//! Unknown fields are ignored. `date` may be absent or `null`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// A calendar month. Trend reports bucket by year or by month.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidConfig(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    /// The following month.
    pub fn succ(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    /// Accepts `YYYY-MM`; a trailing `-DD` is tolerated and dropped.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.trim().split('-');
        let year = parts
            .next()
            .filter(|p| p.len() == 4)
            .and_then(|p| p.parse::<i32>().ok())
            .ok_or_else(|| format!("bad date {s:?}, expected YYYY-MM"))?;
        let month = parts
            .next()
            .filter(|p| p.len() == 2)
            .and_then(|p| p.parse::<u8>().ok())
            .filter(|m| (1..=12).contains(m))
            .ok_or_else(|| format!("bad date {s:?}, expected YYYY-MM"))?;
        match (parts.next(), parts.next()) {
            (None, _) => {}
            (Some(d), None) if d.len() == 2 && d.parse::<u8>().is_ok() => {}
            _ => return Err(format!("bad date {s:?}, expected YYYY-MM")),
        }
        Ok(YearMonth { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One record of document metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    /// Either preformatted `f_surname` tokens or raw `First Last` names.
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub date: Option<YearMonth>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            authors: Vec::new(),
            labels: BTreeSet::new(),
            date: None,
        }
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_authors<I, S>(mut self, authors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.authors = authors.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_date(mut self, date: YearMonth) -> Self {
        self.date = Some(date);
        self
    }

    pub fn has_label(&self, category: &str) -> bool {
        self.labels.contains(category)
    }

    /// +1 if the document carries `category`, −1 otherwise.
    pub fn sign(&self, category: &str) -> i8 {
        if self.has_label(category) {
            1
        } else {
            -1
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.title.trim().is_empty() && self.abstract_text.trim().is_empty() {
            return Err("title and abstract are both empty".into());
        }
        if let Some(l) = self.labels.iter().find(|l| l.is_empty() || l.chars().any(char::is_whitespace)) {
            return Err(format!("label {l:?} is empty or contains whitespace"));
        }
        Ok(())
    }
}

/// An ordered, id-unique collection of documents.
///
/// Immutable once built; every transformation returns a new corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    categories: BTreeSet<String>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            doc.validate().map_err(|message| Error::InvalidDocument {
                id: doc.id.clone(),
                message,
            })?;
            if let Some(first) = seen.insert(doc.id.as_str(), i) {
                return Err(Error::DuplicateId {
                    id: doc.id.clone(),
                    first_line: first + 1,
                    second_line: i + 1,
                });
            }
        }
        Ok(Self::from_validated(documents))
    }

    fn from_validated(documents: Vec<Document>) -> Self {
        let categories = documents.iter().flat_map(|d| d.labels.iter().cloned()).collect();
        Corpus {
            documents,
            categories,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Number of documents labeled with `category`.
    pub fn positives(&self, category: &str) -> usize {
        self.documents.iter().filter(|d| d.has_label(category)).count()
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    /// Writes the corpus back out as JSON lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for doc in &self.documents {
            let line = serde_json::to_string(doc).expect("documents always serialize");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

/// Reads a JSON-lines corpus file. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses JSON-lines records from any reader; line numbers in errors are
/// 1-based.
pub fn read_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        doc.validate().map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        if let Some(&first_line) = first_seen.get(&doc.id) {
            return Err(Error::DuplicateId {
                id: doc.id,
                first_line,
                second_line: line_no,
            });
        }
        first_seen.insert(doc.id.clone(), line_no);
        documents.push(doc);
    }
    Ok(Corpus::from_validated(documents))
}

/// Pairs every document with its ±1 label for one category. A category
/// absent from the corpus labels every document −1.
pub fn binarize_labels<'a>(corpus: &'a Corpus, category: &str) -> Vec<(&'a Document, i8)> {
    corpus.iter().map(|d| (d, d.sign(category))).collect()
}

/// Fractions of the whole corpus assigned to training and validation; the
/// remainder is the test part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, validation_fraction: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction,
            validation_fraction,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.train_fraction > 0.0
            && self.train_fraction < 1.0 + f64::EPSILON
            && (0.0..1.0).contains(&self.validation_fraction)
            && self.train_fraction + self.validation_fraction <= 1.0 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSplit(format!(
                "train_fraction {} / validation_fraction {} out of range",
                self.train_fraction, self.validation_fraction
            )))
        }
    }
}

/// A three-way partition of a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

/// Stratified, seeded three-way split.
///
/// Positives and negatives for `category` are shuffled independently and
/// dealt out so that every part's positive count is the largest-remainder
/// rounding of its proportional share. Documents keep their corpus order
/// inside each part.
pub fn split(corpus: &Corpus, spec: &SplitSpec, category: &str) -> Result<Split> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidSplit("corpus is empty".into()));
    }
    let n = corpus.len();
    let n_train = ((spec.train_fraction * n as f64).round() as usize).min(n);
    let n_val = ((spec.validation_fraction * n as f64).round() as usize).min(n - n_train);
    if n_train == 0 {
        return Err(Error::InvalidSplit(format!(
            "train fraction {} of {n} documents leaves the training part empty",
            spec.train_fraction
        )));
    }
    let sizes = [n_train, n_val, n - n_train - n_val];

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| corpus.documents[i].has_label(category));
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let pos_counts = proportional_counts(pos.len(), &sizes);
    let mut parts: [Vec<usize>; 3] = Default::default();
    let (mut p, mut q) = (0, 0);
    for (k, part) in parts.iter_mut().enumerate() {
        let np = pos_counts[k];
        let nn = sizes[k] - np;
        part.extend_from_slice(&pos[p..p + np]);
        part.extend_from_slice(&neg[q..q + nn]);
        p += np;
        q += nn;
        part.sort_unstable();
    }
    let take = |idx: &[usize]| Corpus::from_validated(idx.iter().map(|&i| corpus.documents[i].clone()).collect());
    Ok(Split {
        train: take(&parts[0]),
        validation: take(&parts[1]),
        test: take(&parts[2]),
    })
}

/// Largest-remainder apportionment of `count` items over parts of the given
/// sizes, proportional to size. Never exceeds a part's size.
pub(crate) fn proportional_counts<const K: usize>(count: usize, sizes: &[usize; K]) -> [usize; K] {
    let total: usize = sizes.iter().sum();
    let mut out = [0usize; K];
    if total == 0 || count == 0 {
        return out;
    }
    let mut remainders = Vec::with_capacity(K);
    for k in 0..K {
        let exact = count as u128 * sizes[k] as u128;
        out[k] = (exact / total as u128) as usize;
        remainders.push(((exact % total as u128), k));
    }
    let assigned: usize = out.iter().sum();
    // ties go to the earlier part so results are deterministic
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in remainders.iter().take(count - assigned) {
        out[k] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn doc(id: &str, labels: &[&str]) -> Document {
        Document::new(id, format!("title {id}"), "").with_labels(labels.iter().copied())
    }

    fn corpus_with(n: usize, positives: usize) -> Corpus {
        Corpus::new(
            (0..n)
                .map(|i| doc(&format!("d{i}"), if i < positives { &["c"] } else { &[] }))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_two_records() {
        let text = r#"{"id":"a","title":"Protein folding","abstract":"","authors":["Y. Togashi"],"labels":["q-bio"],"date":"2002-03"}
{"id":"b","title":"Spin glass","abstract":"dynamics","authors":[],"labels":["cond-mat","nlin"],"date":"2003-01","extra":1}
"#;
        let c = read_corpus(Cursor::new(text)).unwrap();
        assert_eq!(c.len(), 2);
        let cats: Vec<_> = c.categories().iter().cloned().collect();
        assert_eq!(cats, ["cond-mat", "nlin", "q-bio"]);
        assert_eq!(c.documents()[0].date, Some(YearMonth { year: 2002, month: 3 }));
        assert_eq!(c.documents()[1].abstract_text, "dynamics");
    }

    #[test]
    fn duplicate_id_cites_both_lines() {
        let mut lines = Vec::new();
        for i in 1..=7 {
            let id = if i == 3 || i == 7 { "a1".to_string() } else { format!("x{i}") };
            lines.push(format!(r#"{{"id":"{id}","title":"t"}}"#));
        }
        let err = read_corpus(Cursor::new(lines.join("\n"))).unwrap_err();
        match err {
            Error::DuplicateId {
                id,
                first_line,
                second_line,
            } => {
                assert_eq!((id.as_str(), first_line, second_line), ("a1", 3, 7));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = "{\"id\":\"a\",\"title\":\"t\"}\n{not json}\n";
        match read_corpus(Cursor::new(text)).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let text = "{\"id\":\"a\",\"title\":\"\",\"abstract\":\"  \"}\n";
        assert!(matches!(read_corpus(Cursor::new(text)), Err(Error::Parse { line: 1, .. })));
        let text = "{\"id\":\"a\",\"title\":\"t\",\"date\":\"2003-13\"}\n";
        assert!(matches!(read_corpus(Cursor::new(text)), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = read_corpus(Cursor::new("")).unwrap();
        assert!(c.is_empty());
        assert!(c.categories().is_empty());
    }

    #[test]
    fn load_and_save_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = Corpus::new(vec![
            doc("a", &["x"]).with_date(YearMonth::new(1999, 12).unwrap()),
            doc("b", &[]),
        ])
        .unwrap();
        c.save(&path).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), c);
        assert!(matches!(load_corpus(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn binarize_membership() {
        let c = Corpus::new(vec![doc("a", &["A", "B"]), doc("b", &["A"]), doc("c", &[])]).unwrap();
        let ys: Vec<i8> = binarize_labels(&c, "B").into_iter().map(|(_, y)| y).collect();
        assert_eq!(ys, [1, -1, -1]);
        assert!(binarize_labels(&c, "absent").iter().all(|(_, y)| *y == -1));
    }

    #[test]
    fn binarize_reference_counts() {
        let c = corpus_with(5565, 466);
        let pos = binarize_labels(&c, "c").iter().filter(|(_, y)| *y == 1).count();
        assert_eq!(pos, 466);
        assert!(((pos as f64 / 5565.0) * 100.0 - 8.4).abs() < 0.05);
    }

    #[test]
    fn two_thirds_split_sizes() {
        let c = corpus_with(300, 30);
        let s = split(&c, &SplitSpec::new(2.0 / 3.0, 0.0, 1).unwrap(), "c").unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (200, 0, 100));
        assert_eq!(s.train.positives("c"), 20);
        assert_eq!(s.test.positives("c"), 10);
    }

    #[test]
    fn validation_tenth() {
        let c = corpus_with(1000, 100);
        let s = split(&c, &SplitSpec::new(0.9, 0.1, 3).unwrap(), "c").unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (900, 100, 0));
        assert_eq!(s.validation.positives("c"), 10);
    }

    #[test]
    fn split_is_deterministic() {
        let c = corpus_with(97, 13);
        let spec = SplitSpec::new(0.6, 0.2, 42).unwrap();
        assert_eq!(split(&c, &spec, "c").unwrap(), split(&c, &spec, "c").unwrap());
        let other = split(&c, &SplitSpec { seed: 43, ..spec }, "c").unwrap();
        assert_ne!(split(&c, &spec, "c").unwrap(), other);
    }

    #[test]
    fn split_errors() {
        let c = corpus_with(3, 1);
        assert!(matches!(
            split(&c, &SplitSpec { train_fraction: 0.1, validation_fraction: 0.0, seed: 0 }, "c"),
            Err(Error::InvalidSplit(_))
        ));
        assert!(SplitSpec::new(0.8, 0.3, 0).is_err());
        assert!(SplitSpec::new(0.0, 0.3, 0).is_err());
        assert!(split(&Corpus::default(), &SplitSpec::new(0.5, 0.0, 0).unwrap(), "c").is_err());
    }

    #[test]
    fn apportionment_sums() {
        assert_eq!(proportional_counts(11, &[50, 50, 50]), [4, 4, 3]);
        assert_eq!(proportional_counts(0, &[5, 5]), [0, 0]);
        assert_eq!(proportional_counts(10, &[10, 0]), [10, 0]);
    }
}
