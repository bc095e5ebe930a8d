//! Tokenization and lexicon construction.
//!
//! A document's token stream is built in a fixed order: lowercase the title
//! and abstract, split on runs of non-alphanumeric characters, drop
//! stopwords, Porter-stem every word (pure digit strings are kept
//! verbatim), merge listed two-word phrases into `a_b` tokens, and finally
//! append one `f_surname` token per author.

mod lexicon;
pub mod porter;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::{Error, Result};

pub use lexicon::{build_lexicon, document_frequencies, Lexicon};

/// A lowercase, whitespace-free term: a word stem, a merged phrase
/// (`spin_glass`), an author (`y_togashi`) or a digit string.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Returns `None` for empty strings, whitespace or uppercase characters.
    pub fn new(s: impl Into<String>) -> Option<Token> {
        let s = s.into();
        let valid = !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_uppercase());
        valid.then_some(Token(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

const STANDARD_STOPLIST: &str = include_str!("../../data/stoplist.txt");

/// Words removed before stemming.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    /// The shipped list of 318 common English words.
    pub fn standard() -> Self {
        Self::parse(STANDARD_STOPLIST)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist {
            words: words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).filter(|w| !w.is_empty()).collect(),
        }
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Self::from_words(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        std::fs::read_to_string(path).map(|t| Self::parse(&t)).map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words in sorted order, for serialization.
    pub fn sorted_words(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.words.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// Ordered stem pairs that are merged into a single `a_b` token.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhraseList {
    /// first stem → second stems
    pairs: HashMap<String, HashSet<String>>,
}

impl PhraseList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut list = PhraseList::new();
        for (a, b) in pairs {
            list.insert(a.into(), b.into());
        }
        list
    }

    pub fn insert(&mut self, first: String, second: String) {
        self.pairs.entry(first).or_default().insert(second);
    }

    /// Two stems per line, space separated. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut list = PhraseList::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [a, b] = fields[..] else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected two stems, found {:?}", line),
                });
            };
            let (Some(a), Some(b)) = (Token::new(a), Token::new(b)) else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "stems must be lowercase".into(),
                });
            };
            list.insert(a.into_string(), b.into_string());
        }
        Ok(list)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        Self::parse(&text)
    }

    /// Serialized form: sorted, one pair per line.
    pub fn to_text(&self) -> String {
        self.sorted_pairs().iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    pub fn sorted_pairs(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<(&str, &str)> = self
            .pairs
            .iter()
            .flat_map(|(a, bs)| bs.iter().map(move |b| (a.as_str(), b.as_str())))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, first: &str, second: &str) -> bool {
        self.pairs.get(first).is_some_and(|s| s.contains(second))
    }

    pub fn len(&self) -> usize {
        self.pairs.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn stem_word(word: &str) -> String {
    if word.chars().all(|c| c.is_ascii_digit()) {
        word.to_string()
    } else {
        porter::stem(word)
    }
}

/// Normalizes an author name to a `f_surname` token.
///
/// Names that already contain `_` and no whitespace are taken as
/// preformatted. Otherwise the first name contributes its initial, middle
/// initials are dropped and the remaining surname parts are joined without
/// separators: `"Jan van der Berg"` becomes `j_vanderberg`.
pub fn author_token(name: &str) -> Option<Token> {
    let name = name.trim();
    if name.is_empty() {
        return None;
    }
    if name.contains('_') && !name.chars().any(char::is_whitespace) {
        return Token::new(name.to_lowercase());
    }
    let alnum = |s: &str| -> String { s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect() };
    let mut parts: Vec<&str> = name.split_whitespace().collect();
    if parts.len() == 1 {
        // "Y.Togashi"
        match parts[0].rsplit_once('.') {
            Some((first, last)) if !alnum(first).is_empty() && !alnum(last).is_empty() => {
                parts = vec![first, last];
            }
            _ => return Token::new(alnum(parts[0])),
        }
    }
    let initial = alnum(parts[0]).chars().next()?;
    let rest = &parts[1..];
    let surname_parts: Vec<&str> = rest.iter().copied().filter(|p| alnum(p).chars().count() > 1).collect();
    let surname: String = if surname_parts.is_empty() {
        alnum(rest[rest.len() - 1])
    } else {
        surname_parts.iter().map(|p| alnum(p)).collect()
    };
    if surname.is_empty() {
        return None;
    }
    Token::new(format!("{initial}_{surname}"))
}

/// Stoplist plus phrase list: everything needed to tokenize a document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Analyzer {
    pub stoplist: Stoplist,
    pub phrases: PhraseList,
}

impl Analyzer {
    pub fn new(stoplist: Stoplist, phrases: PhraseList) -> Self {
        Analyzer { stoplist, phrases }
    }

    /// Stems of title and abstract words, stopwords removed, before phrase
    /// merging.
    pub fn stems(&self, text: &str) -> Vec<String> {
        words(text).filter(|w| !self.stoplist.contains(w)).map(|w| stem_word(&w)).collect()
    }

    pub fn tokenize(&self, doc: &Document) -> Vec<Token> {
        let mut text = String::with_capacity(doc.title.len() + doc.abstract_text.len() + 1);
        text.push_str(&doc.title);
        text.push(' ');
        text.push_str(&doc.abstract_text);
        self.tokenize_text(&text, &doc.authors)
    }

    pub fn tokenize_text(&self, text: &str, authors: &[String]) -> Vec<Token> {
        let mut stems = self.stems(text).into_iter().peekable();
        let mut tokens = Vec::new();
        while let Some(stem) = stems.next() {
            match stems.peek() {
                Some(next) if self.phrases.contains(&stem, next) => {
                    let next = stems.next().expect("peeked");
                    tokens.push(Token(format!("{stem}_{next}")));
                }
                _ => tokens.push(Token(stem)),
            }
        }
        tokens.extend(authors.iter().filter_map(|a| author_token(a)));
        tokens
    }
}

/// Tokenizes one document with the given phrase list and stoplist.
pub fn tokenize(doc: &Document, phrases: &PhraseList, stoplist: &Stoplist) -> Vec<Token> {
    Analyzer::new(stoplist.clone(), phrases.clone()).tokenize(doc)
}

/// Ranks adjacent stem pairs by how often they occur across the corpus and
/// keeps the `k` most frequent (at least two occurrences, ties broken
/// lexicographically).
///
/// Pairs are counted over the original word adjacency: a stopword between
/// two words breaks the pair. Pairs containing a digit token, or a stem that
/// is itself the stem of a stopword, are excluded.
pub fn rank_bigrams(corpus: &Corpus, stoplist: &Stoplist, k: usize) -> PhraseList {
    let stop_stems: HashSet<String> = stoplist.words.iter().map(|w| stem_word(w)).collect();
    let excluded = |stem: &str| stop_stems.contains(stem) || stem.chars().all(|c| c.is_ascii_digit());
    let mut counts: HashMap<(String, String), usize> = HashMap::new();
    for doc in corpus {
        for text in [&doc.title, &doc.abstract_text] {
            let stems: Vec<Option<String>> = words(text)
                .map(|w| if stoplist.contains(&w) { None } else { Some(stem_word(&w)) })
                .collect();
            for pair in stems.windows(2) {
                if let [Some(a), Some(b)] = pair {
                    if !excluded(a) && !excluded(b) {
                        *counts.entry((a.clone(), b.clone())).or_default() += 1;
                    }
                }
            }
        }
    }
    let mut ranked: Vec<((String, String), usize)> = counts.into_iter().filter(|(_, c)| *c >= 2).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    PhraseList::from_pairs(ranked.into_iter().take(k).map(|(p, _)| p))
}

/// Histogram of token counts for one document, keyed in token order.
pub fn term_counts(tokens: &[Token]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    counts
}
