use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corpusmap::synth::{dated, generate, planted_mislabels, SynthConfig};
use corpusmap::YearMonth;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corpusmap"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_docs: 400,
            topics: vec![("a".into(), 120), ("b".into(), 60), ("tiny".into(), 5)],
            signal_fraction: 0.3,
            seed: 1,
            ..SynthConfig::default()
        };
        generate(&cfg).save(dir.path().join("train.jsonl")).unwrap();
        generate(&SynthConfig { n_docs: 150, seed: 2, ..cfg }).save(dir.path().join("test.jsonl")).unwrap();
        std::fs::write(dir.path().join("c.toml"), "corpus = \"train.jsonl\"\nmodel = \"m.bundle\"\nmin_category_size = 50\n").unwrap();
        Fixture { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self) {
        ok(self.path(), &["train", "--config", "c.toml"]);
    }
}

#[test]
fn usage_errors_exit_2() {
    let f = Fixture::new();
    assert_eq!(run(f.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(f.path(), &["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(f.path(), &["predict", "--mode", "sideways", "--input", "x"]).status.code(), Some(2));
    assert_eq!(run(f.path(), &[]).status.code(), Some(2));
    assert_eq!(run(f.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn failures_exit_1_with_json_error() {
    let f = Fixture::new();
    let out = run(f.path(), &["train", "--corpus", "missing.jsonl", "--model", "m.bundle"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    let out = run(f.path(), &["train", "--corpus", "train.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(f.path(), &["train", "--config", "c.toml", "--c=-2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_bundle_and_skip_report() {
    let f = Fixture::new();
    let report: serde_json::Value = serde_json::from_str(&ok(f.path(), &["train", "--config", "c.toml"])).unwrap();
    let trained: Vec<&str> = report["trained"].as_array().unwrap().iter().map(|t| t["category"].as_str().unwrap()).collect();
    assert_eq!(trained, ["a", "b"]);
    assert_eq!(report["skipped"][0]["category"], "tiny");
    assert_eq!(report["skipped"][0]["positives"], 5);
    let bundle = corpusmap::ModelBundle::load(f.file("m.bundle")).unwrap();
    assert_eq!(bundle.config.min_category_size, 50);
}

#[test]
fn flags_override_config() {
    let f = Fixture::new();
    let report: serde_json::Value =
        serde_json::from_str(&ok(f.path(), &["train", "--config", "c.toml", "--min-category-size", "100", "--weighting", "tf"]))
            .unwrap();
    assert_eq!(report["trained"].as_array().unwrap().len(), 1);
    let bundle = corpusmap::ModelBundle::load(f.file("m.bundle")).unwrap();
    assert_eq!(bundle.config.weighting, corpusmap::Weighting::Tf);
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let f = Fixture::new();
    f.train();
    let first = std::fs::read(f.file("m.bundle")).unwrap();
    let metrics1 = ok(f.path(), &["evaluate", "--config", "c.toml", "--test", "test.jsonl"]);
    f.train();
    assert_eq!(first, std::fs::read(f.file("m.bundle")).unwrap());
    assert_eq!(metrics1, ok(f.path(), &["evaluate", "--config", "c.toml", "--test", "test.jsonl"]));
}

#[test]
fn predict_emits_one_line_per_document() {
    let f = Fixture::new();
    f.train();
    let out = ok(f.path(), &["predict", "--model", "m.bundle", "--input", "test.jsonl"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 150);
    assert_eq!(lines[0]["id"], "d000000");
    let results = lines[0]["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        let p = r["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(r["label"].as_i64().unwrap() > 0, p >= 0.5);
    }
    let raw = ok(f.path(), &["predict", "--model", "m.bundle", "--input", "test.jsonl", "--mode", "raw"]);
    let first: serde_json::Value = serde_json::from_str(raw.lines().next().unwrap()).unwrap();
    for r in first["results"].as_array().unwrap() {
        assert_eq!(r["label"].as_i64().unwrap() > 0, r["f"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn evaluate_writes_metrics_and_size_curve() {
    let f = Fixture::new();
    f.train();
    let csv = ok(f.path(), &["evaluate", "--config", "c.toml", "--test", "test.jsonl", "--size-curve", "size.dat"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "category,size,tp,fp,fn,tn,precision,recall,accuracy,f1");
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let counts: usize = cells[2..6].iter().map(|c| c.parse::<usize>().unwrap()).sum();
        assert_eq!(counts, 150);
    }
    let dat = std::fs::read_to_string(f.file("size.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn lexicon_command() {
    let f = Fixture::new();
    ok(f.path(), &["lexicon", "--corpus", "train.jsonl", "--out", "lex.txt", "--suggest-phrases", "5", "--phrases-out", "p.txt"]);
    let lex = corpusmap::Lexicon::load(f.file("lex.txt")).unwrap();
    assert_eq!(lex.df_threshold(), 2);
    assert_eq!(lex.n_docs(), 400);
    assert!(corpusmap::PhraseList::load(f.file("p.txt")).unwrap().len() <= 5);
    let strict = ok(f.path(), &["lexicon", "--corpus", "train.jsonl", "--df-threshold", "5"]);
    assert!(corpusmap::Lexicon::parse(&strict).unwrap().len() < lex.len());
}

#[test]
fn ablate_command() {
    let f = Fixture::new();
    let csv = ok(f.path(), &["ablate", "--config", "c.toml", "--test", "test.jsonl", "--df-thresholds", "2,5", "--cs", "1,10"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[0].starts_with("weighting,df_threshold,c,lexicon_size"));
    let split = ok(f.path(), &["ablate", "--config", "c.toml", "--weightings", "tfidf", "--df-thresholds", "2"]);
    assert_eq!(split.lines().count(), 2);
}

#[test]
fn trend_command() {
    let f = Fixture::new();
    f.train();
    let plan: Vec<_> = (0..3).map(|k| (YearMonth::new(2000 + k, 6).unwrap(), 40, 4 * (k as usize + 1))).collect();
    dated("a", &plan, 5, &SynthConfig { signal_fraction: 0.3, ..SynthConfig::default() }).save(f.file("dated.jsonl")).unwrap();
    let csv = ok(f.path(), &["trend", "--config", "c.toml", "--corpus", "dated.jsonl", "--category", "a", "--dat", "t.dat"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "period,total,positive,percent");
    assert!(lines[1].starts_with("2000,40,"));
    assert!(lines.iter().any(|l| l.starts_with("undated,5,")));
    let monthly = ok(f.path(), &["trend", "--config", "c.toml", "--corpus", "dated.jsonl", "--category", "a", "--bucket", "month"]);
    assert_eq!(monthly.lines().count(), 1 + 25 + 1);
    let out = run(f.path(), &["trend", "--config", "c.toml", "--corpus", "dated.jsonl", "--category", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outliers_then_relabel() {
    let f = Fixture::new();
    let planted = planted_mislabels(5, 0);
    planted.dirty.save(f.file("dirty.jsonl")).unwrap();
    let csv = ok(
        f.path(),
        &["outliers", "--corpus", "dirty.jsonl", "--category", "target", "--k", "10", "--min-category-size", "50"],
    );
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "rank,doc_id,alpha,label,f,title");
    let ranked: Vec<String> = lines.map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    assert_eq!(ranked.len(), 10);

    let verdicts: String = planted
        .flipped
        .iter()
        .map(|id| {
            let action = if planted.dirty.get(id).unwrap().has_label("target") { "move_out" } else { "move_in" };
            format!("{{\"doc_id\":\"{id}\",\"action\":\"{action}\",\"note\":\"planted\"}}\n")
        })
        .collect();
    std::fs::write(f.file("v.jsonl"), verdicts).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&ok(
        f.path(),
        &["relabel", "--corpus", "dirty.jsonl", "--category", "target", "--verdicts", "v.jsonl", "--out", "fixed.jsonl", "--log", "log.jsonl"],
    ))
    .unwrap();
    assert_eq!(summary["moved_in"].as_u64().unwrap() + summary["moved_out"].as_u64().unwrap(), 5);
    let fixed = corpusmap::corpus::load_corpus(f.file("fixed.jsonl")).unwrap();
    assert_eq!(fixed, planted.clean);
    assert_eq!(std::fs::read_to_string(f.file("log.jsonl")).unwrap().lines().count(), 5);

    std::fs::write(f.file("bad.jsonl"), "{\"doc_id\":\"nope\",\"action\":\"keep\"}\n").unwrap();
    let out = run(
        f.path(),
        &["relabel", "--corpus", "dirty.jsonl", "--category", "target", "--verdicts", "bad.jsonl", "--out", "x.jsonl"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!f.file("x.jsonl").exists());
}

#[test]
fn serve_reports_busy_port() {
    let f = Fixture::new();
    f.train();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = run(f.path(), &["serve", "--config", "c.toml", "--port", &port]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));
}
