//! Stemmer output against a 27k-word reference vocabulary.

use corpusmap::textpipe::porter::stem;

#[test]
fn matches_reference_vocabulary() {
    let fixture = include_str!("data/porter_vocab.txt");
    let mut mismatches = Vec::new();
    let mut total = 0;
    for line in fixture.lines().filter(|l| !l.is_empty()) {
        let (word, expected) = line.split_once(' ').expect("`word stem` line");
        total += 1;
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: got {got}, want {expected}"));
        }
    }
    assert!(total > 20_000);
    assert!(mismatches.is_empty(), "{} of {total} differ:\n{}", mismatches.len(), mismatches[..mismatches.len().min(40)].join("\n"));
}
