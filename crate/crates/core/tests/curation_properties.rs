use corpusmap::curation::{apply_verdicts, clean_loop_status, find_outliers, Action, OutlierParams, RelabelVerdict};
use corpusmap::synth::{disjoint_two_category, generate, planted_mislabels, SynthConfig};
use corpusmap::textpipe::Analyzer;
use corpusmap::vectorizer::Featurizer;
use corpusmap::{Corpus, PhraseList, Stoplist, Weighting};
use proptest::prelude::*;

fn featurizer(corpus: &Corpus) -> Featurizer {
    Featurizer::fit(corpus, Analyzer::new(Stoplist::standard(), PhraseList::new()), 2, Weighting::TfIdf).unwrap()
}

fn params(k: usize) -> OutlierParams {
    OutlierParams {
        k,
        min_category_size: 10,
        ..OutlierParams::default()
    }
}

#[test]
fn zero_k_reports_nothing() {
    let c = disjoint_two_category(60, 1);
    let report = find_outliers(&c, &featurizer(&c), "alpha", &params(0)).unwrap();
    assert!(report.outliers.is_empty());
    assert_eq!(report.alpha_mass(), 0.0);
}

#[test]
fn separable_data_has_no_bounded_multipliers() {
    let c = disjoint_two_category(80, 2);
    let report = find_outliers(&c, &featurizer(&c), "alpha", &params(80)).unwrap();
    assert!(report.converged);
    assert!(report.outliers.iter().all(|o| !o.bounded && o.alpha < report.c));
    assert!(report.outliers.windows(2).all(|w| w[0].alpha.abs() >= w[1].alpha.abs()));
}

#[test]
fn correcting_flips_lowers_outlier_mass() {
    let planted = planted_mislabels(5, 3);
    let f = featurizer(&planted.dirty);
    let p = params(10);
    let fixes: Vec<RelabelVerdict> = planted
        .flipped
        .iter()
        .map(|id| {
            let action = if planted.dirty.get(id).unwrap().has_label("target") { Action::MoveOut } else { Action::MoveIn };
            RelabelVerdict::new(id.clone(), action)
        })
        .collect();
    let before = clean_loop_status(&planted.dirty, "target", &[], &f, &p).unwrap();
    let after = clean_loop_status(&planted.dirty, "target", &[fixes], &f, &p).unwrap();
    assert_eq!(after.rounds, 1);
    assert_eq!(after.moved_in + after.moved_out, 5);
    assert_eq!(after.positives, planted.clean.positives("target"));
    assert!(after.outlier_alpha_mass.unwrap() < before.outlier_alpha_mass.unwrap());
}

fn verdicts(corpus: &Corpus) -> impl Strategy<Value = Vec<RelabelVerdict>> {
    let ids: Vec<String> = corpus.iter().map(|d| d.id.clone()).collect();
    prop::collection::btree_map(prop::sample::select(ids), prop::sample::select(vec![Action::MoveIn, Action::MoveOut, Action::Keep]), 0..40)
        .prop_map(|m| m.into_iter().map(|(id, a)| RelabelVerdict::new(id, a)).collect())
}

fn two_topics() -> Corpus {
    generate(&SynthConfig {
        n_docs: 120,
        topics: vec![("a".into(), 30), ("b".into(), 50)],
        words_per_doc: 6,
        seed: 9,
        ..SynthConfig::default()
    })
}

proptest! {
    #[test]
    fn verdicts_are_idempotent_and_local(v in verdicts(&two_topics())) {
        let corpus = two_topics();
        let (once, s1) = apply_verdicts(&corpus, &v, "a").unwrap();
        let (twice, s2) = apply_verdicts(&once, &v, "a").unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(s2.moved_in + s2.moved_out, 0);
        prop_assert_eq!(s1.moved_in + s1.moved_out + s1.kept, v.len());
        prop_assert_eq!(s1.positives_after, once.positives("a"));
        for (d0, d1) in corpus.iter().zip(once.iter()) {
            prop_assert_eq!(&d0.id, &d1.id);
            prop_assert_eq!(d0.has_label("b"), d1.has_label("b"));
            prop_assert_eq!(&d0.title, &d1.title);
        }
    }
}
