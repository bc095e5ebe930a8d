//! Track the share of a category across dated documents.

use corpusmap::classifier::train_all;
use corpusmap::evaluation::{trend, write_trend_csv, Bucket};
use corpusmap::synth::{dated, generate, SynthConfig};
use corpusmap::textpipe::Analyzer;
use corpusmap::{PhraseList, Stoplist, TrainConfig, YearMonth};

fn main() -> corpusmap::Result<()> {
    let base = SynthConfig {
        signal_fraction: 0.3,
        seed: 77,
        ..SynthConfig::default()
    };
    let train = generate(&SynthConfig {
        n_docs: 2000,
        topics: vec![("t".into(), 200)],
        seed: 0,
        ..base.clone()
    });
    let bundle = train_all(&train, &Analyzer::new(Stoplist::standard(), PhraseList::new()), &TrainConfig::default())?;

    let plan: Vec<_> = (0..6).map(|k| Ok((YearMonth::new(2000 + k, 3)?, 500, 10 + 15 * k as usize))).collect::<corpusmap::Result<_>>()?;
    let corpus = dated("t", &plan, 40, &base);
    let report = trend(&bundle, &corpus, "t", Bucket::Year)?;
    write_trend_csv(std::io::stdout().lock(), &report)?;
    for (row, (_, n, k)) in report.rows.iter().zip(&plan) {
        println!("{}: planted {:.1}%, measured {:.1}%", row.period, 100.0 * *k as f64 / *n as f64, row.percent);
    }
    Ok(())
}
