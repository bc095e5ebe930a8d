//! `corpusmap` command line.
//!
//! Exit status: 0 on success, 1 when the operation fails (a JSON error
//! object goes to stderr), 2 for usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use corpusmap::classifier::train_all;
use corpusmap::corpus::{load_corpus, split};
use corpusmap::curation::{apply_verdicts, find_outliers, write_outliers_csv, RelabelVerdict, VerdictLog};
use corpusmap::evaluation::{
    ablate, evaluate, size_curve, trend, write_ablation_csv, write_metrics_csv, write_size_curve_dat, write_trend_csv,
    write_trend_dat, AblationGrid, Bucket,
};
use corpusmap::textpipe::{build_lexicon, document_frequencies, rank_bigrams};
use corpusmap::vectorizer::Featurizer;
use corpusmap::{ModelBundle, PredictMode, SplitSpec, Weighting};
use serde_json::json;

use crate::server::{classify_results, ServiceOptions, ServiceState};
use crate::{PipelineConfig, Result, ServiceError};

#[derive(Debug, Parser)]
#[command(name = "corpusmap", version, about = "Train, apply and curate linear text classifiers")]
pub struct Cli {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the lexicon of a corpus.
    Lexicon(LexiconArgs),
    /// Train one classifier per category and write a model bundle.
    Train(TrainArgs),
    /// Classify documents with a saved bundle.
    Predict(PredictArgs),
    /// Score a bundle against a labeled test corpus.
    Evaluate(EvaluateArgs),
    /// Compare weightings, document-frequency thresholds and C values.
    Ablate(AblateArgs),
    /// Predicted share of a category per year or month.
    Trend(TrendArgs),
    /// Rank training documents of a category by dual coefficient.
    Outliers(OutliersArgs),
    /// Apply move_in / move_out / keep verdicts to a corpus.
    Relabel(RelabelArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Default, Args)]
pub struct TextArgs {
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    #[arg(long)]
    pub phrases: Option<PathBuf>,
    #[arg(long)]
    pub df_threshold: Option<u32>,
}

#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub text: TextArgs,
    /// `tf` or `tfidf`.
    #[arg(long)]
    pub weighting: Option<Weighting>,
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub min_category_size: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub text: TextArgs,
    /// Lexicon file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the K most frequent word pairs as a phrase file.
    #[arg(long, value_name = "K", requires = "phrases_out")]
    pub suggest_phrases: Option<usize>,
    #[arg(long)]
    pub phrases_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Output bundle.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Documents as JSON lines.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "calibrated", value_parser = parse_mode)]
    pub mode: PredictMode,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "calibrated", value_parser = parse_mode)]
    pub mode: PredictMode,
    /// metrics CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recall/precision against category size, as a whitespace data file.
    #[arg(long)]
    pub size_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training corpus (split into train and test when `--test` is absent).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Category the split is stratified on; the most frequent by default.
    #[arg(long)]
    pub stratify: Option<String>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long, value_delimiter = ',', default_values = ["tf", "tfidf"])]
    pub weightings: Vec<Weighting>,
    #[arg(long, value_delimiter = ',', default_values = ["2", "5"])]
    pub df_thresholds: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values = ["1"])]
    pub cs: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub category: String,
    /// `year` or `month`.
    #[arg(long)]
    pub bucket: Option<Bucket>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a whitespace data file for plotting.
    #[arg(long)]
    pub dat: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutliersArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub category: String,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long)]
    pub clean_c: Option<f64>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelabelArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub category: String,
    /// JSON lines of `{"doc_id", "action", "note"}`.
    #[arg(long)]
    pub verdicts: PathBuf,
    /// Relabeled corpus.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value = "cli")]
    pub actor: String,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Verdict log; replayed over the corpus at startup.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write each retrained bundle here before serving it.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[arg(long)]
    pub clean_c: Option<f64>,
    #[arg(long)]
    pub min_category_size: Option<usize>,
}

fn parse_mode(s: &str) -> std::result::Result<PredictMode, String> {
    match s {
        "raw" => Ok(PredictMode::Raw),
        "calibrated" => Ok(PredictMode::Calibrated),
        _ => Err(format!("mode must be `raw` or `calibrated`, got {s:?}")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TextArgs {
    fn apply(&self, config: &mut PipelineConfig) {
        if self.stoplist.is_some() {
            config.stoplist = self.stoplist.clone();
        }
        if self.phrases.is_some() {
            config.phrases = self.phrases.clone();
        }
        set(&mut config.df_threshold, self.df_threshold);
    }
}

impl ModelArgs {
    fn apply(&self, config: &mut PipelineConfig) {
        self.text.apply(config);
        set(&mut config.weighting, self.weighting);
        set(&mut config.c, self.c);
        set(&mut config.min_category_size, self.min_category_size);
        set(&mut config.validation_fraction, self.validation_fraction);
        set(&mut config.seed, self.seed);
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Lexicon(a) => {
            set_path(&mut config.corpus, &a.corpus);
            a.text.apply(&mut config);
            config.validate()?;
            lexicon(&config, &a)
        }
        Command::Train(a) => {
            set_path(&mut config.corpus, &a.corpus);
            set_path(&mut config.model, &a.model);
            a.model_args.apply(&mut config);
            config.validate()?;
            train(&config)
        }
        Command::Predict(a) => {
            set_path(&mut config.model, &a.model);
            predict(&config, &a)
        }
        Command::Evaluate(a) => {
            set_path(&mut config.model, &a.model);
            evaluate_cmd(&config, &a)
        }
        Command::Ablate(a) => {
            set_path(&mut config.corpus, &a.corpus);
            a.model_args.apply(&mut config);
            config.validate()?;
            ablate_cmd(&config, &a)
        }
        Command::Trend(a) => {
            set_path(&mut config.model, &a.model);
            set_path(&mut config.corpus, &a.corpus);
            set(&mut config.bucket, a.bucket);
            trend_cmd(&config, &a)
        }
        Command::Outliers(a) => {
            set_path(&mut config.corpus, &a.corpus);
            a.model_args.apply(&mut config);
            set(&mut config.clean_c, a.clean_c);
            config.validate()?;
            outliers(&config, &a)
        }
        Command::Relabel(a) => {
            set_path(&mut config.corpus, &a.corpus);
            set_path(&mut config.verdict_log, &a.log);
            relabel(&config, &a)
        }
        Command::Serve(a) => {
            set_path(&mut config.model, &a.model);
            set_path(&mut config.corpus, &a.corpus);
            set_path(&mut config.verdict_log, &a.log);
            set(&mut config.clean_c, a.clean_c);
            set(&mut config.min_category_size, a.min_category_size);
            config.validate()?;
            serve(&config, &a)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn io_error(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn lexicon(config: &PipelineConfig, a: &LexiconArgs) -> Result<()> {
    let corpus = load_corpus(config.require_corpus()?)?;
    let analyzer = config.analyzer()?;
    let lex = build_lexicon(&corpus, &analyzer.phrases, &analyzer.stoplist, config.df_threshold)?;
    let distinct = document_frequencies(&corpus, &analyzer).len();
    let mut out = output(a.out.as_deref())?;
    out.write_all(lex.to_text().as_bytes())?;
    out.flush()?;
    if let (Some(k), Some(path)) = (a.suggest_phrases, &a.phrases_out) {
        let phrases = rank_bigrams(&corpus, &analyzer.stoplist, k);
        std::fs::write(path, phrases.to_text()).map_err(|e| io_error(path, e))?;
    }
    eprintln!(
        "{}",
        json!({ "documents": corpus.len(), "distinct_tokens": distinct, "df_threshold": config.df_threshold, "terms": lex.len() })
    );
    Ok(())
}

fn train(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config.require_corpus()?)?;
    let model_path = config.require_model()?;
    let bundle = train_all(&corpus, &config.analyzer()?, &config.train_config())?;
    bundle.save(model_path)?;
    let trained: Vec<_> = bundle
        .models
        .values()
        .map(|m| json!({ "category": m.category, "positives": m.positives, "converged": m.converged }))
        .collect();
    println!(
        "{}",
        json!({
            "model": model_path,
            "lexicon_size": bundle.lexicon().len(),
            "trained": trained,
            "skipped": bundle.skipped,
        })
    );
    Ok(())
}

fn predict(config: &PipelineConfig, a: &PredictArgs) -> Result<()> {
    let bundle = ModelBundle::load(config.require_model()?)?;
    let reader = BufReader::new(File::open(&a.input).map_err(|e| io_error(&a.input, e))?);
    let mut out = output(a.out.as_deref())?;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: corpusmap::Document = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Input(format!("{} line {}: {e}", a.input.display(), i + 1)))?;
        let results = classify_results(bundle.predict(&doc, a.mode));
        writeln!(out, "{}", json!({ "id": doc.id, "results": results }))?;
    }
    out.flush()?;
    Ok(())
}

fn evaluate_cmd(config: &PipelineConfig, a: &EvaluateArgs) -> Result<()> {
    let bundle = ModelBundle::load(config.require_model()?)?;
    let test = load_corpus(&a.test)?;
    let report = evaluate(&bundle, &test, a.mode)?;
    write_metrics_csv(output(a.out.as_deref())?, &report)?;
    if let Some(path) = &a.size_curve {
        let points = size_curve(&bundle, &test)?;
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        write_size_curve_dat(BufWriter::new(file), &points)?;
    }
    Ok(())
}

fn ablate_cmd(config: &PipelineConfig, a: &AblateArgs) -> Result<()> {
    let corpus = load_corpus(config.require_corpus()?)?;
    let (train, test) = match &a.test {
        Some(p) => (corpus, load_corpus(p)?),
        None => {
            let category = match &a.stratify {
                Some(c) => c.clone(),
                None => corpus
                    .categories()
                    .iter()
                    .max_by_key(|c| (corpus.positives(c), std::cmp::Reverse(c.as_str())))
                    .cloned()
                    .unwrap_or_default(),
            };
            let spec = SplitSpec::new(config.train_fraction, 0.0, config.seed)?;
            let parts = split(&corpus, &spec, &category)?;
            (parts.train, parts.test)
        }
    };
    let grid = AblationGrid {
        weightings: a.weightings.clone(),
        df_thresholds: a.df_thresholds.clone(),
        cs: a.cs.clone(),
    };
    let rows = ablate(&train, &test, &config.analyzer()?, &config.train_config(), &grid)?;
    write_ablation_csv(output(a.out.as_deref())?, &rows)?;
    Ok(())
}

fn trend_cmd(config: &PipelineConfig, a: &TrendArgs) -> Result<()> {
    let bundle = ModelBundle::load(config.require_model()?)?;
    let corpus = load_corpus(config.require_corpus()?)?;
    let report = trend(&bundle, &corpus, &a.category, config.bucket)?;
    write_trend_csv(output(a.out.as_deref())?, &report)?;
    if let Some(path) = &a.dat {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        write_trend_dat(BufWriter::new(file), &report)?;
    }
    Ok(())
}

fn outliers(config: &PipelineConfig, a: &OutliersArgs) -> Result<()> {
    let corpus = load_corpus(config.require_corpus()?)?;
    let featurizer = Featurizer::fit(&corpus, config.analyzer()?, config.df_threshold, config.weighting)?;
    let report = find_outliers(&corpus, &featurizer, &a.category, &config.outlier_params(a.k))?;
    write_outliers_csv(output(a.out.as_deref())?, &report)?;
    Ok(())
}

fn read_verdicts(path: &Path) -> Result<Vec<RelabelVerdict>> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_error(path, e))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| ServiceError::Input(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn relabel(config: &PipelineConfig, a: &RelabelArgs) -> Result<()> {
    let corpus = load_corpus(config.require_corpus()?)?;
    let verdicts = read_verdicts(&a.verdicts)?;
    let (next, summary) = apply_verdicts(&corpus, &verdicts, &a.category)?;
    next.save(&a.out)?;
    if let Some(path) = &config.verdict_log {
        VerdictLog::new(path).append(&a.category, &verdicts, &a.actor)?;
    }
    let mut body = serde_json::to_value(summary)?;
    body["category"] = json!(a.category);
    println!("{body}");
    Ok(())
}

fn serve(config: &PipelineConfig, a: &ServeArgs) -> Result<()> {
    let bundle = ModelBundle::load(config.require_model()?)?;
    let mut corpus = load_corpus(config.require_corpus()?)?;
    let log = config.verdict_log.as_ref().map(VerdictLog::new);
    if let Some(log) = &log {
        corpus = log.replay(&corpus)?;
    }
    let options = ServiceOptions {
        outliers: config.outlier_params(50),
        verdict_log: log,
        save_model: a.save_model.clone(),
        ..ServiceOptions::default()
    };
    let state = ServiceState::new(bundle, corpus, options);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| ServiceError::Io(std::io::Error::new(e.kind(), format!("cannot bind {}:{}: {e}", a.host, a.port))))?;
        eprintln!("{}", json!({ "listening": listener.local_addr()?.to_string() }));
        crate::server::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}
