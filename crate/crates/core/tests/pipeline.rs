use corpusmap::classifier::{top_weights, train_all};
use corpusmap::corpus::split;
use corpusmap::evaluation::{evaluate, trend, Bucket};
use corpusmap::synth::{dated, disjoint_two_category, generate, SynthConfig};
use corpusmap::textpipe::Analyzer;
use corpusmap::{ModelBundle, PhraseList, PredictMode, SplitSpec, Stoplist, TrainConfig, YearMonth};
use proptest::prelude::*;

fn analyzer() -> Analyzer {
    Analyzer::new(Stoplist::standard(), PhraseList::new())
}

fn small_config() -> TrainConfig {
    TrainConfig {
        min_category_size: 10,
        ..TrainConfig::default()
    }
}

fn topic_bundle(seed: u64) -> (ModelBundle, corpusmap::Corpus) {
    let cfg = SynthConfig {
        n_docs: 600,
        topics: vec![("t".into(), 120)],
        signal_fraction: 0.3,
        seed,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg);
    (train_all(&corpus, &analyzer(), &small_config()).unwrap(), corpus)
}

#[test]
fn disjoint_vocabularies_separate_on_held_out_data() {
    let corpus = disjoint_two_category(200, 11);
    let parts = split(&corpus, &SplitSpec::new(0.7, 0.0, 3).unwrap(), "alpha").unwrap();
    let bundle = train_all(&parts.train, &analyzer(), &small_config()).unwrap();
    for mode in [PredictMode::Raw, PredictMode::Calibrated] {
        let report = evaluate(&bundle, &parts.test, mode).unwrap();
        for m in &report.categories {
            assert_eq!(m.f1, 1.0, "{} {mode:?}", m.category);
        }
    }
}

#[test]
fn save_load_predicts_identically() {
    let (bundle, _) = topic_bundle(5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bundle");
    bundle.save(&path).unwrap();
    let loaded = ModelBundle::load(&path).unwrap();
    let docs = generate(&SynthConfig {
        n_docs: 100,
        topics: vec![("t".into(), 30)],
        seed: 99,
        ..SynthConfig::default()
    });
    for doc in &docs {
        for mode in [PredictMode::Raw, PredictMode::Calibrated] {
            let a = bundle.predict(doc, mode);
            let b = loaded.predict(doc, mode);
            assert_eq!(a.len(), b.len());
            for (k, pa) in &a {
                let pb = &b[k];
                assert_eq!(pa.f.to_bits(), pb.f.to_bits(), "{}", doc.id);
                assert_eq!(pa.p.to_bits(), pb.p.to_bits(), "{}", doc.id);
                assert_eq!(pa.label, pb.label);
            }
        }
    }
}

#[test]
fn training_is_deterministic() {
    let (a, _) = topic_bundle(8);
    let (b, _) = topic_bundle(8);
    assert_eq!(a.to_text(), b.to_text());
}

#[test]
fn confusion_covers_every_test_document() {
    let (bundle, _) = topic_bundle(2);
    let test = generate(&SynthConfig {
        n_docs: 321,
        topics: vec![("t".into(), 50)],
        seed: 77,
        ..SynthConfig::default()
    });
    let report = evaluate(&bundle, &test, PredictMode::Calibrated).unwrap();
    let m = report.get("t").unwrap();
    assert_eq!(m.confusion.total(), 321);
    assert_eq!(m.size, 120);
    assert_eq!(m.confusion.tp + m.confusion.fn_, 50);
}

#[test]
fn planted_topic_words_carry_the_largest_weights() {
    let (bundle, _) = topic_bundle(4);
    let top = top_weights(bundle.model("t").unwrap(), bundle.lexicon(), 10).unwrap();
    assert_eq!(top.positive.len(), 10);
    let topical = top.positive.iter().filter(|(t, _)| t.as_str().starts_with("tp0x")).count();
    assert!(topical >= 8, "{:?}", top.positive);
    assert!(top.negative.iter().all(|(t, _)| !t.as_str().starts_with("tp0x")));
}

fn month(y: i32, m: u8) -> YearMonth {
    YearMonth::new(y, m).unwrap()
}

#[test]
fn trend_rows_are_exhaustive_and_average_to_the_total() {
    let (bundle, _) = topic_bundle(6);
    let plan = [(month(2001, 11), 40, 4), (month(2002, 3), 60, 12), (month(2004, 1), 30, 3)];
    let corpus = dated("t", &plan, 25, &SynthConfig::default());

    let monthly = trend(&bundle, &corpus, "t", Bucket::Month).unwrap();
    assert_eq!(monthly.rows.len(), 27);
    assert_eq!(monthly.rows.first().unwrap().period, "2001-11");
    assert_eq!(monthly.rows.last().unwrap().period, "2004-01");
    assert!(monthly.rows.iter().filter(|r| r.total == 0).all(|r| r.percent == 0.0));

    let yearly = trend(&bundle, &corpus, "t", Bucket::Year).unwrap();
    assert_eq!(yearly.rows.iter().map(|r| r.period.as_str()).collect::<Vec<_>>(), ["2001", "2002", "2003", "2004"]);
    assert_eq!(yearly.undated.as_ref().unwrap().total, 25);

    // document-weighted average of bucket percentages is the overall percentage
    for report in [&monthly, &yearly] {
        let rows: Vec<_> = report.rows.iter().chain(&report.undated).collect();
        let n: usize = rows.iter().map(|r| r.total).sum();
        let weighted: f64 = rows.iter().map(|r| r.percent * r.total as f64).sum::<f64>() / n as f64;
        assert!((weighted - report.overall_percent()).abs() < 1e-9);
    }
}

#[test]
fn single_month_corpus_gives_single_bucket() {
    let (bundle, _) = topic_bundle(6);
    let corpus = dated("t", &[(month(1999, 7), 50, 10)], 0, &SynthConfig::default());
    for bucket in [Bucket::Year, Bucket::Month] {
        let report = trend(&bundle, &corpus, "t", bucket).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].total, 50);
        assert!(report.undated.is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_stratified_partition(
        n in 20usize..300,
        rate in 0.0f64..1.0,
        train in 0.3f64..0.9,
        seed in any::<u64>(),
    ) {
        let positives = (rate * n as f64) as usize;
        let corpus = generate(&SynthConfig {
            n_docs: n,
            topics: vec![("t".into(), positives)],
            words_per_doc: 5,
            authors_per_doc: 0,
            seed,
            ..SynthConfig::default()
        });
        let validation = (1.0 - train) / 2.0;
        let parts = split(&corpus, &SplitSpec::new(train, validation, seed).unwrap(), "t").unwrap();
        let mut ids: Vec<&str> = [&parts.train, &parts.validation, &parts.test]
            .iter()
            .flat_map(|c| c.iter().map(|d| d.id.as_str()))
            .collect();
        prop_assert_eq!(ids.len(), n);
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
        for part in [&parts.train, &parts.validation, &parts.test] {
            let expected = positives as f64 * part.len() as f64 / n as f64;
            prop_assert!((part.positives("t") as f64 - expected).abs() <= 1.0 + 1e-9);
        }
    }
}
