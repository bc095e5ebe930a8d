//! Save a trained bundle, load it back and confirm predictions are unchanged.

use corpusmap::classifier::train_all;
use corpusmap::synth::{generate, SynthConfig};
use corpusmap::textpipe::Analyzer;
use corpusmap::{ModelBundle, PhraseList, PredictMode, Stoplist, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate(&SynthConfig::default());
    let bundle = train_all(&corpus, &Analyzer::new(Stoplist::standard(), PhraseList::new()), &TrainConfig::default())?;
    let path = std::env::temp_dir().join("corpusmap-example.bundle");
    bundle.save(&path)?;
    let loaded = ModelBundle::load(&path)?;
    let same = corpus.iter().all(|d| bundle.predict(d, PredictMode::Calibrated) == loaded.predict(d, PredictMode::Calibrated));
    println!("{} bytes at {}; predictions identical: {same}", std::fs::metadata(&path)?.len(), path.display());

    // any edit to the body breaks the seal
    let tampered = std::fs::read_to_string(&path)?.replacen("\"c\":1.0", "\"c\":2.0", 1);
    println!("tampered load: {:?}", ModelBundle::from_text(&tampered).err());
    Ok(())
}
