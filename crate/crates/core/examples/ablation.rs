//! Compare weighting schemes, lexicon cutoffs and C values on one split.

use corpusmap::evaluation::{ablate, write_ablation_csv, AblationGrid};
use corpusmap::synth::{generate, SynthConfig};
use corpusmap::textpipe::Analyzer;
use corpusmap::{PhraseList, Stoplist, TrainConfig};

fn main() -> corpusmap::Result<()> {
    let cfg = SynthConfig {
        n_docs: 1000,
        topics: vec![("t".into(), 200)],
        noise_words: 20,
        noise_per_doc: 40,
        ..SynthConfig::default()
    };
    let train = generate(&cfg);
    let test = generate(&SynthConfig { seed: 1000, ..cfg });
    let analyzer = Analyzer::new(Stoplist::standard(), PhraseList::new());
    let rows = ablate(&train, &test, &analyzer, &TrainConfig::default(), &AblationGrid::default())?;
    write_ablation_csv(std::io::stdout().lock(), &rows)
}
