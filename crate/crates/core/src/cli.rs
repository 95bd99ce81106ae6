//! The `cpc` command line.
//!
//! Every command that takes `--out DIR` writes its artifacts there together
//! with a `manifest.json` (command, version, parameters, input hashes, output
//! names; the output directory itself is not recorded). Errors are printed
//! to stderr as `{"error": {"kind", "message"}}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::compressor::{Budget, CompressionRequest, CompressionResult, Compressor};
use crate::curation::{build_dataset, validate_dataset, CurationConfig, CurationProviders, CurationTuple};
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_json, CorpusDoc, JsonlWriter};
use crate::metrics::{edit_similarity, keyword_recall, normalize, rouge_l, token_f1};
use crate::providers::{
    BigramDensity, ContextEncoder, DensityProvider, DensityVocab, GenerationProvider, HashEncoder,
    HttpConfig, RemoteEncoder, RemoteGenerator, ScriptedGenerator, SentenceEmbedder, Standalone,
    ENV_API_KEY, ENV_EMBED_URL, ENV_LLM_URL, UnigramDensity,
};
use crate::segmentation::Document;
use crate::trainer::{synthetic_cqr, train, write_log_csv, Checkpoint, MntpTarget, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "cpc", version, about = "Context-aware sentence-level prompt compression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress one document for a question.
    Compress(CompressArgs),
    /// Build a CQR dataset from a JSONL corpus.
    Curate(CurateArgs),
    /// Train the toy encoder.
    TrainToy(TrainArgs),
    /// Score predicted answers against references.
    Eval(EvalArgs),
    /// Measure compression latency over a corpus.
    Bench(BenchArgs),
    /// Check every line of a dataset file.
    ValidateDataset(ValidateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RemoteArgs {
    #[arg(long, env = ENV_EMBED_URL)]
    pub embed_url: Option<String>,
    #[arg(long, env = ENV_LLM_URL)]
    pub llm_url: Option<String>,
    /// Never written to manifests.
    #[arg(long, env = ENV_API_KEY, hide_env_values = true)]
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl RemoteArgs {
    fn http(&self, url: &Option<String>, var: &str) -> Result<HttpConfig> {
        let url = url
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("remote provider needs --{} or {var}", flag_for(var))))?;
        Ok(HttpConfig {
            api_key: self.api_key.clone(),
            ..HttpConfig::new(url)
        })
    }
}

fn flag_for(var: &str) -> &'static str {
    if var == ENV_EMBED_URL {
        "embed-url"
    } else {
        "llm-url"
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(clap::ArgGroup::new("budget").required(true).args(["ratio", "budget_tokens"])))]
pub struct CompressArgs {
    /// UTF-8 text file holding the context.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub question: String,
    /// Fraction of context tokens to keep, in (0, 1].
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Absolute token budget.
    #[arg(long)]
    pub budget_tokens: Option<usize>,
    /// `test`, `remote`, or `toy:<checkpoint>`.
    #[arg(long, default_value = "test")]
    pub encoder: String,
    /// Output directory; the result goes to stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write a relevance heatmap HTML file here.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurateArgs {
    /// JSONL corpus of `{"id", "text"}` records.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    #[arg(long, default_value_t = 4e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.7)]
    pub theta: f64,
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub max_positives: usize,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// `scripted:<file.json>` or `remote`.
    #[arg(long)]
    pub generator: String,
    /// Sentence embedder for negative mining: `test`, `remote`, or `toy:<checkpoint>`.
    #[arg(long, default_value = "test")]
    pub embedder: String,
    /// Answer-density model for the KL filter: `bigram` or `unigram`.
    #[arg(long, default_value = "bigram")]
    pub density: String,
    /// Compute KL without the question in the conditioning text.
    #[arg(long)]
    pub kl_without_question: bool,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// JSONL dataset of curated tuples.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub dataset: Option<PathBuf>,
    /// Train on this many generated synthetic tuples instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub delta: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub literal_double_exp: bool,
    /// Predict masked tokens from their own position instead of the previous one.
    #[arg(long)]
    pub same_position_mntp: bool,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 50)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 0.25)]
    pub holdout: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// JSONL of `{"id", "answer", "keywords"?}` predictions.
    #[arg(long)]
    pub predictions: PathBuf,
    /// JSONL of `{"id", "answer", "keywords"?}` references.
    #[arg(long)]
    pub references: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// JSONL corpus; records may carry a `question`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Question for records without one.
    #[arg(long, default_value = "What is this text about?")]
    pub question: String,
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value = "test")]
    pub encoder: String,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Timed runs per document; the median is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub remote: RemoteArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 4e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}

pub fn error_json(e: &Error) -> String {
    json!({"error": {"kind": e.kind(), "message": e.to_string()}}).to_string()
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Compress(a) => cmd_compress(a).map(|_| ()),
        Command::Curate(a) => cmd_curate(a),
        Command::TrainToy(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Bench(a) => cmd_bench(a).map(|_| ()),
        Command::ValidateDataset(a) => cmd_validate(a),
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    params: &'a T,
    inputs: BTreeMap<String, String>,
    outputs: Vec<&'a str>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_manifest<T: Serialize>(
    dir: &Path,
    command: &str,
    params: &T,
    inputs: &[&Path],
    outputs: &[&str],
) -> Result<()> {
    let inputs = inputs
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        params,
        inputs,
        outputs: outputs.to_vec(),
    };
    write_json(dir.join("manifest.json"), &manifest)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Builds the encoder named by `spec`: `test`, `remote`, or `toy:<checkpoint>`.
pub fn context_encoder(spec: &str, remote: &RemoteArgs) -> Result<Box<dyn ContextEncoder>> {
    match spec {
        "test" => Ok(Box::new(HashEncoder::default())),
        "remote" => Ok(Box::new(RemoteEncoder::new(remote.http(&remote.embed_url, ENV_EMBED_URL)?)?)),
        s => match s.strip_prefix("toy:") {
            Some(path) => Ok(Box::new(Checkpoint::load(path)?.encoder())),
            None => Err(Error::UnsupportedProvider(format!("unknown encoder {s:?}"))),
        },
    }
}

fn sentence_embedder(spec: &str, remote: &RemoteArgs) -> Result<Box<dyn SentenceEmbedder>> {
    if spec == "remote" {
        return Ok(Box::new(RemoteEncoder::new(remote.http(&remote.embed_url, ENV_EMBED_URL)?)?));
    }
    Ok(Box::new(Standalone {
        encoder: context_encoder(spec, remote)?,
    }))
}

pub fn cmd_compress(a: &CompressArgs) -> Result<CompressionResult> {
    let text = read_text(&a.input)?;
    let budget = match (a.ratio, a.budget_tokens) {
        (Some(r), None) => Budget::Ratio(r),
        (None, Some(t)) => Budget::Tokens(t),
        _ => return Err(Error::InvalidConfig("give exactly one of --ratio and --budget-tokens".into())),
    };
    let doc = Document::new(text);
    let req = CompressionRequest::new(doc, a.question.as_str(), budget)?;
    let compressor = Compressor::new(context_encoder(&a.encoder, &a.remote)?);
    let result = compressor.compress(&req)?;
    if let Some(path) = &a.heatmap {
        std::fs::write(path, render_heatmap(&req.context, &a.question, &result))
            .map_err(|e| Error::io(path, e))?;
    }
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            write_json(dir.join("result.json"), &result)?;
            write_manifest(dir, "compress", a, &[&a.input], &["result.json"])?;
        }
        None => println!("{}", serde_json::to_string_pretty(&result)?),
    }
    Ok(result)
}

fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Standalone HTML page shading each sentence by its relevance; kept
/// sentences are underlined.
pub fn render_heatmap(doc: &Document, question: &str, result: &CompressionResult) -> String {
    let (lo, hi) = result
        .scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.score), hi.max(s.score)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut body = String::new();
    for (s, sent) in result.scores.iter().zip(&doc.sentences) {
        let alpha = (s.score - lo) / span;
        let kept = result.kept_indices.contains(&s.index);
        let _ = writeln!(
            body,
            "<span class=\"s{}\" title=\"#{} score {:.4}\" style=\"background: rgba(220, 40, 40, {:.3})\">{}</span>",
            if kept { " kept" } else { "" },
            s.index,
            s.score,
            alpha,
            html_escape(&sent.text)
        );
    }
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Sentence relevance</title>\n\
         <style>body {{ font-family: sans-serif; max-width: 50em; margin: 2em auto; line-height: 1.8; }} \
         .kept {{ text-decoration: underline; }}</style>\n</head>\n<body>\n\
         <p><b>Question:</b> {}</p>\n<p><b>Kept</b> {} of {} tokens (budget {}).</p>\n<p>\n{}</p>\n</body>\n</html>\n",
        html_escape(question),
        result.compressed_tokens,
        result.original_tokens,
        result.budget_tokens,
        body
    )
}

pub fn cmd_curate(a: &CurateArgs) -> Result<()> {
    let corpus: Vec<CorpusDoc> = read_jsonl(&a.corpus)?;
    let cfg = CurationConfig {
        theta: a.theta,
        beta: a.beta,
        lambda: a.lambda,
        negatives: a.negatives,
        seed: a.seed,
        max_positives_per_doc: a.max_positives,
        condition_on_question: !a.kl_without_question,
        parallelism: a.parallelism,
        ..CurationConfig::default()
    };
    cfg.validate()?;
    let mut inputs: Vec<&Path> = vec![&a.corpus];
    let generator: Box<dyn GenerationProvider> = match a.generator.strip_prefix("scripted:") {
        Some(path) => {
            inputs.push(Path::new(path));
            Box::new(ScriptedGenerator::from_file(path)?)
        }
        None if a.generator == "remote" => {
            Box::new(RemoteGenerator::new(a.remote.http(&a.remote.llm_url, ENV_LLM_URL)?)?)
        }
        None => return Err(Error::UnsupportedProvider(format!("unknown generator {:?}", a.generator))),
    };
    let embedder = sentence_embedder(&a.embedder, &a.remote)?;
    let vocab = DensityVocab::from_texts(corpus.iter().map(|d| d.text.as_str()));
    let density: Box<dyn DensityProvider> = match a.density.as_str() {
        "bigram" => Box::new(BigramDensity::new(vocab)),
        "unigram" => Box::new(UnigramDensity::new(vocab)),
        other => return Err(Error::UnsupportedProvider(format!("unknown density model {other:?}"))),
    };
    let providers = CurationProviders {
        generator: generator.as_ref(),
        embedder: embedder.as_ref(),
        density: density.as_ref(),
    };
    create_dir(&a.out)?;
    let mut writer = JsonlWriter::create(a.out.join("dataset.jsonl"))?;
    let stats = build_dataset(&corpus, &cfg, &providers, |t| writer.write(t))?;
    writer.finish()?;
    log::info!("curated {} tuples from {} documents", stats.tuples, stats.documents);
    write_json(a.out.join("stats.json"), &stats)?;
    write_manifest(&a.out, "curate", a, &inputs, &["dataset.jsonl", "stats.json"])
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        negatives: a.negatives,
        delta: a.delta,
        learning_rate: a.lr,
        steps: a.steps,
        seed: a.seed,
        temperature: a.temperature,
        literal_double_exp: a.literal_double_exp,
        dim: a.dim,
        mntp_target: if a.same_position_mntp {
            MntpTarget::SamePosition
        } else {
            MntpTarget::NextToken
        },
        weight_decay: a.weight_decay,
        eval_every: a.eval_every,
        holdout_fraction: a.holdout,
    };
    let (dataset, inputs): (Vec<CurationTuple>, Vec<&Path>) = match (&a.dataset, a.synthetic) {
        (Some(path), _) => (read_jsonl(path)?, vec![path.as_path()]),
        (None, Some(n)) => (synthetic_cqr(n, a.seed), vec![]),
        (None, None) => return Err(Error::InvalidConfig("give --dataset or --synthetic".into())),
    };
    let outcome = train(&dataset, &cfg)?;
    create_dir(&a.out)?;
    Checkpoint::new(cfg.clone(), outcome.encoder.clone()).save(a.out.join("checkpoint.json"))?;
    write_log_csv(a.out.join("train_log.csv"), &outcome.log)?;
    if let Some(acc) = outcome.final_accuracy() {
        log::info!("held-out retrieval accuracy {acc:.3}");
    }
    write_manifest(&a.out, "train-toy", a, &inputs, &["checkpoint.json", "train_log.csv"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub id: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub rouge_l: f64,
    pub token_f1: f64,
    pub edit_similarity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    /// Mean of each metric over the rows that have it.
    pub mean: BTreeMap<String, f64>,
    pub rows: Vec<EvalRow>,
}

/// Keywords of the prediction: its own list when given, otherwise the gold
/// keywords that occur as whole words in its normalized answer.
fn predicted_keywords(pred: &AnswerRecord, gold: &[String]) -> Vec<String> {
    if let Some(k) = &pred.keywords {
        return k.clone();
    }
    let hay = format!(" {} ", normalize(&pred.answer));
    gold.iter()
        .filter(|k| {
            let k = normalize(k);
            !k.is_empty() && hay.contains(&format!(" {k} "))
        })
        .cloned()
        .collect()
}

pub fn evaluate_answers(predictions: &[AnswerRecord], references: &[AnswerRecord]) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, &AnswerRecord> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut rows = Vec::with_capacity(references.len());
    for r in references {
        let p = by_id
            .get(r.id.as_str())
            .ok_or_else(|| Error::InvalidRequest(format!("no prediction for id {:?}", r.id)))?;
        let keyword_recall = match &r.keywords {
            Some(gold) if !gold.is_empty() => Some(keyword_recall(gold, &predicted_keywords(p, gold))?.score),
            _ => None,
        };
        rows.push(EvalRow {
            id: r.id.clone(),
            rouge_l: rouge_l(&r.answer, &p.answer).score,
            token_f1: token_f1(&r.answer, &p.answer).score,
            edit_similarity: edit_similarity(&r.answer, &p.answer).score,
            keyword_recall,
        });
    }
    let mut mean = BTreeMap::new();
    let avg = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let cols: [(&str, fn(&EvalRow) -> Option<f64>); 4] = [
        ("rouge_l", |r| Some(r.rouge_l)),
        ("token_f1", |r| Some(r.token_f1)),
        ("edit_similarity", |r| Some(r.edit_similarity)),
        ("keyword_recall", |r| r.keyword_recall),
    ];
    for (name, get) in cols {
        if let Some(m) = avg(rows.iter().filter_map(get).collect()) {
            mean.insert(name.to_string(), m);
        }
    }
    Ok(EvalReport {
        count: rows.len(),
        mean,
        rows,
    })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalReport> {
    let predictions: Vec<AnswerRecord> = read_jsonl(&a.predictions)?;
    let references: Vec<AnswerRecord> = read_jsonl(&a.references)?;
    let report = evaluate_answers(&predictions, &references)?;
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            write_json(dir.join("eval.json"), &report)?;
            write_manifest(dir, "eval", a, &[&a.predictions, &a.references], &["eval.json"])?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub id: String,
    pub sentences: usize,
    pub tokens: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    /// Inclusive lower and exclusive upper token bound.
    pub tokens: (usize, usize),
    pub documents: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub documents: usize,
    pub avg_seconds: f64,
    pub median_seconds: f64,
    pub rows: Vec<BenchRow>,
    pub by_length: Vec<LengthBucket>,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Power-of-two token buckets.
fn length_table(rows: &[BenchRow]) -> Vec<LengthBucket> {
    let mut buckets: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let lo = if r.tokens == 0 { 0 } else { 1 << r.tokens.ilog2() };
        buckets.entry(lo).or_default().push(r.seconds);
    }
    buckets
        .into_iter()
        .map(|(lo, ts)| LengthBucket {
            tokens: (lo, (lo * 2).max(1)),
            documents: ts.len(),
            mean_seconds: ts.iter().sum::<f64>() / ts.len() as f64,
        })
        .collect()
}

/// Times compression of every document: `warmup` untimed runs, then the
/// median of `repeats` timed runs.
pub fn bench_corpus(
    compressor: &Compressor<Box<dyn ContextEncoder>>,
    corpus: &[CorpusDoc],
    question: &str,
    ratio: f64,
    warmup: usize,
    repeats: usize,
) -> Result<BenchReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidRequest("benchmark corpus is empty".into()));
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for d in corpus {
        let q = d.question.as_deref().unwrap_or(question);
        let doc = Document::new(d.text.as_str());
        let (sentences, tokens) = (doc.len(), doc.token_count);
        let req = CompressionRequest::new(doc, q, Budget::Ratio(ratio))?;
        for _ in 0..warmup {
            compressor.compress(&req)?;
        }
        let times = (0..repeats.max(1))
            .map(|_| {
                let t = Instant::now();
                compressor.compress(&req)?;
                Ok(t.elapsed().as_secs_f64())
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(BenchRow {
            id: d.id.clone(),
            sentences,
            tokens,
            seconds: median(&times),
        });
    }
    let secs: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    Ok(BenchReport {
        documents: rows.len(),
        avg_seconds: secs.iter().sum::<f64>() / secs.len() as f64,
        median_seconds: median(&secs),
        by_length: length_table(&rows),
        rows,
    })
}

pub fn cmd_bench(a: &BenchArgs) -> Result<BenchReport> {
    let corpus: Vec<CorpusDoc> = read_jsonl(&a.corpus)?;
    let compressor = Compressor::new(context_encoder(&a.encoder, &a.remote)?);
    let report = bench_corpus(&compressor, &corpus, &a.question, a.ratio, a.warmup, a.repeats)?;
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            write_json(dir.join("bench.json"), &report)?;
            write_manifest(dir, "bench", a, &[&a.corpus], &["bench.json"])?;
        }
        None => {
            println!("documents {}  avg {:.6}s  median {:.6}s", report.documents, report.avg_seconds, report.median_seconds);
            println!("{:>8} {:>8} {:>6} {:>12}", "tokens>=", "tokens<", "docs", "mean_s");
            for b in &report.by_length {
                println!("{:>8} {:>8} {:>6} {:>12.6}", b.tokens.0, b.tokens.1, b.documents, b.mean_seconds);
            }
        }
    }
    Ok(report)
}

pub fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let report = validate_dataset(&a.dataset, a.lambda, a.negatives)?;
    println!("{}", serde_json::to_string(&report)?);
    match report.failures.first() {
        None => Ok(()),
        Some((line, message)) => Err(Error::Validation {
            line: *line,
            message: format!("{message} ({} failing lines)", report.failures.len()),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_and_budget_are_exclusive() {
        let r = Cli::try_parse_from([
            "cpc", "compress", "--input", "x", "--question", "q", "--ratio", "0.5", "--budget-tokens", "3",
        ]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["cpc", "compress", "--input", "x", "--question", "q"]);
        assert!(r.is_err());
        assert!(Cli::try_parse_from(["cpc", "compress", "--input", "x", "--question", "q", "--ratio", "0.5"]).is_ok());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0]), 3.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let recs = vec![
            AnswerRecord { id: "a".into(), answer: "in Paris".into(), keywords: Some(vec!["Paris".into()]) },
            AnswerRecord { id: "b".into(), answer: "1889".into(), keywords: None },
        ];
        let r = evaluate_answers(&recs, &recs).unwrap();
        assert!(r.mean.values().all(|&m| m == 1.0), "{:?}", r.mean);
        assert_eq!(r.mean.len(), 4);
    }

    #[test]
    fn keywords_found_in_answer_text() {
        let gold = vec!["New York".to_string(), "1901".to_string()];
        let p = AnswerRecord { id: "a".into(), answer: "Born in new york.".into(), keywords: None };
        assert_eq!(predicted_keywords(&p, &gold), ["New York"]);
    }

    #[test]
    fn heatmap_escapes_text() {
        let doc = Document::new("A <b> tag. Another one.");
        let c = Compressor::new(HashEncoder::default());
        let req = CompressionRequest::new(doc.clone(), "tag?", Budget::Ratio(0.5)).unwrap();
        let res = c.compress(&req).unwrap();
        let html = render_heatmap(&doc, "tag?", &res);
        assert!(html.contains("&lt;b&gt;") && !html.contains("<b> tag"));
        assert_eq!(html.matches("<span").count(), 2);
    }
}
