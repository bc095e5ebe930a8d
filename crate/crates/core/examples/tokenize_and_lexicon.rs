//! Tokenize a document, build a lexicon and rank candidate phrases.

use corpusmap::synth::{generate, SynthConfig};
use corpusmap::textpipe::{build_lexicon, rank_bigrams, Analyzer};
use corpusmap::{Document, PhraseList, Stoplist};

fn main() -> corpusmap::Result<()> {
    let phrases = PhraseList::from_pairs([("neural", "network")]);
    let analyzer = Analyzer::new(Stoplist::standard(), phrases.clone());
    let doc = Document::new("x1", "Training Neural Networks", "We study the generalization of neural networks.")
        .with_authors(["Ada Lovelace"]);
    let tokens: Vec<String> = analyzer.tokenize(&doc).into_iter().map(|t| t.into_string()).collect();
    println!("tokens: {tokens:?}");

    let corpus = generate(&SynthConfig::default());
    let lexicon = build_lexicon(&corpus, &phrases, &Stoplist::standard(), 2)?;
    println!("lexicon: {} terms over {} documents (df >= {})", lexicon.len(), lexicon.n_docs(), lexicon.df_threshold());
    println!("suggested phrases:\n{}", rank_bigrams(&corpus, &Stoplist::standard(), 5).to_text());
    Ok(())
}
