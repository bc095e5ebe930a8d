//! Surface likely mislabels, record verdicts, relabel and retrain.

use corpusmap::classifier::train_all;
use corpusmap::curation::{apply_verdicts, find_outliers, Action, OutlierParams, RelabelVerdict, VerdictLog};
use corpusmap::evaluation::evaluate;
use corpusmap::synth::planted_mislabels;
use corpusmap::textpipe::Analyzer;
use corpusmap::vectorizer::Featurizer;
use corpusmap::{PhraseList, PredictMode, Stoplist, TrainConfig, Weighting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let planted = planted_mislabels(5, 0);
    let analyzer = Analyzer::new(Stoplist::standard(), PhraseList::new());
    let featurizer = Featurizer::fit(&planted.dirty, analyzer.clone(), 2, Weighting::TfIdf)?;
    let params = OutlierParams {
        k: 10,
        min_category_size: 50,
        ..OutlierParams::default()
    };
    let report = find_outliers(&planted.dirty, &featurizer, "target", &params)?;
    for o in &report.outliers {
        let planted_flip = planted.flipped.contains(&o.doc_id);
        println!("{:>2} {} alpha {:.3} label {:+} f {:+.3}{}", o.rank, o.doc_id, o.alpha, o.label, o.f, if planted_flip { "  <- flipped" } else { "" });
    }

    // a reviewer who recognises exactly the planted flips
    let verdicts: Vec<RelabelVerdict> = report
        .outliers
        .iter()
        .map(|o| {
            let action = match (planted.flipped.contains(&o.doc_id), o.label > 0) {
                (false, _) => Action::Keep,
                (true, true) => Action::MoveOut,
                (true, false) => Action::MoveIn,
            };
            RelabelVerdict::new(o.doc_id.clone(), action)
        })
        .collect();
    let (fixed, summary) = apply_verdicts(&planted.dirty, &verdicts, "target")?;
    println!("{summary:?}");

    let dir = std::env::temp_dir().join("corpusmap-curation-example");
    std::fs::create_dir_all(&dir)?;
    let log = VerdictLog::new(dir.join("verdicts.jsonl"));
    log.append("target", &verdicts, "example")?;
    println!("log holds {} records", log.read()?.len());

    let config = TrainConfig {
        min_category_size: 50,
        ..TrainConfig::default()
    };
    for (name, corpus) in [("before", &planted.dirty), ("after", &fixed)] {
        let bundle = train_all(corpus, &analyzer, &config)?;
        let m = evaluate(&bundle, &planted.held_out, PredictMode::Calibrated)?;
        println!("held-out F1 {name}: {:.4}", m.get("target").map_or(0.0, |m| m.f1));
    }
    Ok(())
}
