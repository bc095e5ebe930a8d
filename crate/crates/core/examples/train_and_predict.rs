//! Train one model per category, classify a document and inspect the weights.

use corpusmap::classifier::{top_weights, train_all};
use corpusmap::evaluation::evaluate;
use corpusmap::synth::{generate, SynthConfig};
use corpusmap::textpipe::Analyzer;
use corpusmap::{Document, PhraseList, PredictMode, Stoplist, TrainConfig};

fn main() -> corpusmap::Result<()> {
    let cfg = SynthConfig {
        n_docs: 800,
        topics: vec![("physics".into(), 200), ("biology".into(), 120), ("rare".into(), 10)],
        ..SynthConfig::default()
    };
    let train = generate(&cfg);
    let test = generate(&SynthConfig { seed: 99, ..cfg });
    let analyzer = Analyzer::new(Stoplist::standard(), PhraseList::new());
    let bundle = train_all(&train, &analyzer, &TrainConfig::default())?;
    for s in &bundle.skipped {
        println!("skipped {s:?}");
    }

    let doc = Document::new("q", "tp0x1 tp0x4 tp0x9", "bg2 bg17");
    for (category, p) in bundle.predict(&doc, PredictMode::Calibrated) {
        println!("{category}: f = {:+.3}, p = {:.3}, label {}", p.f, p.p, p.label);
    }

    let report = evaluate(&bundle, &test, PredictMode::Calibrated)?;
    for m in &report.categories {
        println!("{}: precision {:.3} recall {:.3} F1 {:.3}", m.category, m.precision, m.recall, m.f1);
    }

    let top = top_weights(bundle.model("physics")?, bundle.lexicon(), 5)?;
    println!("most positive: {:?}", top.positive.iter().map(|(t, w)| format!("{}={w:.3}", t.as_str())).collect::<Vec<_>>());
    Ok(())
}
