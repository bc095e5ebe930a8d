//! Seeded synthetic corpora.
//!
//! Topic words look like `tp0x17` and background words like `bg42`; both
//! pass through stemming unchanged, so generated text and lexicon tokens
//! coincide. Authors are preformatted tokens (`x_tp0a3`, `x_bg9`).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, YearMonth};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_docs: usize,
    /// `(label, number of positive documents)`.
    pub topics: Vec<(String, usize)>,
    pub words_per_doc: usize,
    /// Probability that a word of a positive document comes from its topic.
    pub signal_fraction: f64,
    pub vocab_per_topic: usize,
    pub background_vocab: usize,
    pub authors_per_doc: usize,
    /// Probability that an author of a positive document comes from the
    /// topic's author pool.
    pub author_signal: f64,
    /// Size of a pool of high-frequency words (`nz0`, `nz1`, ...) present in
    /// every document regardless of label.
    pub noise_words: usize,
    /// Occurrences of noise words added to each document.
    pub noise_per_doc: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_docs: 1000,
            topics: vec![("target".into(), 100)],
            words_per_doc: 40,
            signal_fraction: 0.15,
            vocab_per_topic: 80,
            background_vocab: 3000,
            authors_per_doc: 3,
            author_signal: 0.3,
            noise_words: 0,
            noise_per_doc: 0,
            seed: 0,
        }
    }
}

/// Log-uniform draw from `0..n`, a rough Zipf shape.
fn zipf_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let u: f64 = rng.gen();
    (((n as f64 + 1.0).powf(u) - 1.0) as usize).min(n - 1)
}

/// Generates a corpus: each topic labels exactly its requested number of
/// documents, chosen at random and independently of the other topics.
pub fn generate(config: &SynthConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut memberships: Vec<Vec<usize>> = vec![Vec::new(); config.n_docs];
    for (t, (_, positives)) in config.topics.iter().enumerate() {
        let mut ids: Vec<usize> = (0..config.n_docs).collect();
        ids.shuffle(&mut rng);
        for &i in &ids[..(*positives).min(config.n_docs)] {
            memberships[i].push(t);
        }
    }
    let docs = memberships
        .iter()
        .enumerate()
        .map(|(i, topics)| {
            let mut words: Vec<String> = (0..config.words_per_doc.max(1))
                .map(|_| match topics.choose(&mut rng) {
                    Some(t) if rng.gen_bool(config.signal_fraction) => {
                        format!("tp{t}x{}", zipf_index(&mut rng, config.vocab_per_topic))
                    }
                    _ => format!("bg{}", zipf_index(&mut rng, config.background_vocab)),
                })
                .collect();
            if config.noise_words > 0 {
                for _ in 0..config.noise_per_doc {
                    let at = rng.gen_range(0..=words.len());
                    words.insert(at, format!("nz{}", rng.gen_range(0..config.noise_words)));
                }
            }
            let authors: Vec<String> = (0..config.authors_per_doc)
                .map(|_| match topics.choose(&mut rng) {
                    Some(t) if rng.gen_bool(config.author_signal) => format!("x_tp{t}a{}", rng.gen_range(0..40)),
                    _ => format!("x_bg{}", rng.gen_range(0..5000)),
                })
                .collect();
            let split = words.len().min(8);
            Document::new(format!("d{i:06}"), words[..split].join(" "), words[split..].join(" "))
                .with_authors(authors)
                .with_labels(topics.iter().map(|&t| config.topics[t].0.clone()))
        })
        .collect();
    Corpus::new(docs).expect("generated documents are valid")
}

/// A clean training corpus, the same corpus with mislabels planted in
/// `target`, the planted ids, and a clean held-out corpus from the same
/// generator.
#[derive(Clone, Debug)]
pub struct PlantedMislabels {
    pub clean: Corpus,
    pub dirty: Corpus,
    pub flipped: Vec<String>,
    pub held_out: Corpus,
}

/// 200 training documents (80 in `target`), `n_flips` flipped labels and a
/// 1000-document held-out set.
pub fn planted_mislabels(n_flips: usize, seed: u64) -> PlantedMislabels {
    let config = SynthConfig {
        n_docs: 200,
        topics: vec![("target".into(), 80)],
        signal_fraction: 0.3,
        background_vocab: 1000,
        seed,
        ..SynthConfig::default()
    };
    let clean = generate(&config);
    let (dirty, flipped) = plant_flips(&clean, "target", n_flips, seed.wrapping_add(0x5eed));
    let held_out = generate(&SynthConfig {
        n_docs: 1000,
        topics: vec![("target".into(), 400)],
        seed: seed.wrapping_add(0x7e57),
        ..config
    });
    let held_out = Corpus::new(
        held_out
            .into_documents()
            .into_iter()
            .map(|mut d| {
                d.id = format!("h{}", &d.id[1..]);
                d
            })
            .collect(),
    )
    .expect("generated documents are valid");
    PlantedMislabels {
        clean,
        dirty,
        flipped,
        held_out,
    }
}

/// Documents labeled `alpha` or `beta` (never both) drawn from disjoint
/// vocabularies, plus a few shared words.
pub fn disjoint_two_category(n_docs: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n_docs)
        .map(|i| {
            let cat = if i % 2 == 0 { "alpha" } else { "beta" };
            let words: Vec<String> = (0..16)
                .map(|k| {
                    if k % 4 == 3 {
                        format!("common{}", rng.gen_range(0..10))
                    } else {
                        format!("{cat}{}", rng.gen_range(0..30))
                    }
                })
                .collect();
            Document::new(format!("d{i:05}"), words[..4].join(" "), words[4..].join(" ")).with_labels([cat])
        })
        .collect();
    Corpus::new(docs).expect("generated documents are valid")
}

/// `n_docs` background documents in which each `(label, positives)` pair
/// labels exactly that many documents.
pub fn sized_categories(sizes: &[(&str, usize)], n_docs: usize, seed: u64) -> Corpus {
    generate(&SynthConfig {
        n_docs,
        topics: sizes.iter().map(|(c, p)| (c.to_string(), *p)).collect(),
        seed,
        ..SynthConfig::default()
    })
}

/// Flips the `label` membership of `n_flips` randomly chosen documents
/// (drawn in equal numbers from positives and negatives when possible).
/// Returns the corrupted corpus and the flipped ids.
pub fn plant_flips(corpus: &Corpus, label: &str, n_flips: usize, seed: u64) -> (Corpus, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| corpus.documents()[i].has_label(label));
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let from_pos = (n_flips / 2).min(pos.len());
    let from_neg = (n_flips - from_pos).min(neg.len());
    let mut chosen: Vec<usize> = pos[..from_pos].iter().chain(&neg[..from_neg]).copied().collect();
    chosen.sort_unstable();
    let mut docs = corpus.documents().to_vec();
    for &i in &chosen {
        let labels = &mut docs[i].labels;
        if !labels.remove(label) {
            labels.insert(label.to_string());
        }
    }
    let ids = chosen.iter().map(|&i| docs[i].id.clone()).collect();
    (Corpus::new(docs).expect("relabeling keeps documents valid"), ids)
}

/// One entry per month: `(month, documents, of which labeled)`.
pub type MonthPlan = (YearMonth, usize, usize);

/// Dated corpus following `plan` for the single topic `label`, plus
/// `undated` documents without a date. Text statistics come from `template`;
/// its size, topics and seed are overridden.
pub fn dated(label: &str, plan: &[MonthPlan], undated: usize, template: &SynthConfig) -> Corpus {
    let seed = template.seed;
    let total: usize = plan.iter().map(|p| p.1).sum::<usize>() + undated;
    let mut docs = Vec::with_capacity(total);
    let mut offset = 0;
    for (k, &(month, n, positives)) in plan.iter().enumerate() {
        let part = generate(&SynthConfig {
            n_docs: n,
            topics: vec![(label.to_string(), positives)],
            seed: seed.wrapping_add(k as u64),
            ..template.clone()
        });
        for mut d in part.into_documents() {
            d.id = format!("m{offset:06}");
            offset += 1;
            docs.push(d.with_date(month));
        }
    }
    if undated > 0 {
        let part = generate(&SynthConfig {
            n_docs: undated,
            topics: vec![(label.to_string(), undated / 10)],
            seed: seed.wrapping_add(plan.len() as u64),
            ..template.clone()
        });
        for mut d in part.into_documents() {
            d.id = format!("m{offset:06}");
            offset += 1;
            docs.push(d);
        }
    }
    Corpus::new(docs).expect("generated documents are valid")
}
