//! Command-line surface: argument parsing, flat JSON config resolution,
//! model-bundle persistence, and per-command artifact writing.
//!
//! Conventions shared by every subcommand: `--config` names a JSON file of
//! flat, documented keys and command-line flags override file values;
//! `--seed` fixes all randomness; `--out` picks the artifact directory.
//! Each run writes a `manifest.json` echoing the resolved configuration,
//! the seed, the package version, and wall time, and every artifact embeds
//! the seed and a 12-hex-digit config fingerprint (JSON artifacts as
//! fields, CSV artifacts as a leading comment line). Validation problems
//! exit with status 1 and a single-line `error: ...` message; unknown
//! flags exit with status 2 and usage text.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::article::{read_corpus, write_corpus, ArticleDocument, ArticleError, Vocabulary};
use crate::checkpoint::{self, CheckpointError};
use crate::config::{config_hash, ConfigError, ModelConfig, SubnetSet, TrainConfig};
use crate::experiments::{
    collect_attention, shuffle_disturb, write_attention, DisturbMode, DisturbOptions,
    ExperimentError,
};
use crate::features::{csv_header, csv_row, FeatureError, FeatureExtractor, NormStats};
use crate::model::{predict_batched, ModelBundle, Prediction};
use crate::subnet::SubnetError;
use crate::synthetic::{generate, CorpusKind};
use crate::train::{epoch_log_csv, evaluate, train, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Article(#[from] ArticleError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Subnet(#[from] SubnetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io {0}: {1}")]
    Io(String, std::io::Error),
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e.to_string())
    }
}

fn io_err(context: &Path, e: std::io::Error) -> CommandError {
    CommandError::Io(context.display().to_string(), e)
}

#[derive(Debug, Parser)]
#[command(
    name = "coqan",
    version,
    about = "Train, evaluate, and probe joint article-quality models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and save the bundle plus an epoch log.
    Train(TrainArgs),
    /// Score a labeled corpus with a saved model.
    Eval(EvalArgs),
    /// Predict probabilities and labels for a corpus.
    Predict(PredictArgs),
    /// Write the 48 writing features of every article as CSV.
    ExtractFeatures(ExtractFeaturesArgs),
    /// Measure prediction flips under random order shuffles.
    Disturb(DisturbArgs),
    /// Export feature-interaction attention matrices for one article.
    ExportAttention(ExportAttentionArgs),
    /// Generate a labeled synthetic corpus.
    GenSynthetic(GenSyntheticArgs),
    /// Train one ablation variant and report its test metrics.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file with flat keys; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for parameter init, batching, and shuffles.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory to write artifacts into.
    #[arg(long, default_value = "coqan-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training corpus (JSON lines).
    #[arg(long)]
    pub train: PathBuf,
    /// Validation corpus (JSON lines).
    #[arg(long)]
    pub val: PathBuf,
    /// Subnetworks to cascade, e.g. "LO,WC,TS" or "LO".
    #[arg(long)]
    pub subnets: Option<String>,
    /// Upper bound on training epochs.
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Saved model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled corpus to score.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Saved model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus to score (labels optional).
    #[arg(long)]
    pub data: PathBuf,
    /// Also export per-article attention matrices.
    #[arg(long)]
    pub attention: bool,
}

#[derive(Debug, Args)]
pub struct ExtractFeaturesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Corpus to featurize; the keyword list is fitted on it.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct DisturbArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Saved model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled corpus supplying the disturbance base.
    #[arg(long)]
    pub data: PathBuf,
    /// What to shuffle: sentences, blocks, or both.
    #[arg(long)]
    pub mode: String,
    /// Independent shuffle repeats to average over.
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportAttentionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Saved model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus holding the article.
    #[arg(long)]
    pub data: PathBuf,
    /// Article id to export; defaults to the first article.
    #[arg(long)]
    pub article: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Corpus kind: layout-signal, feature-signal, text-signal, or mixed.
    #[arg(long)]
    pub spec: String,
    /// Number of articles to generate.
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Subnetworks of the ablation variant, e.g. "LO" or "LO,TS".
    #[arg(long)]
    pub subnets: String,
    /// Training corpus.
    #[arg(long)]
    pub train: PathBuf,
    /// Validation corpus.
    #[arg(long)]
    pub val: PathBuf,
    /// Held-out corpus for the reported metrics.
    #[arg(long)]
    pub test: PathBuf,
}

/// Flat, documented config-file keys. Every key is optional; absent keys
/// fall back to the `model` preset ("desk-small" unless set to "default")
/// and the training defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Base model preset: "desk-small" or "default".
    pub model: Option<String>,
    pub gru_hidden: Option<usize>,
    pub kernel_sizes: Option<Vec<usize>>,
    pub filters_per_kernel: Option<usize>,
    pub wc_embed_dim: Option<usize>,
    pub wc_heads: Option<usize>,
    pub wc_head_dim: Option<usize>,
    pub wc_layers: Option<usize>,
    pub category_count: Option<usize>,
    pub text_layers_sent: Option<usize>,
    pub text_heads_sent: Option<usize>,
    pub text_d_model_sent: Option<usize>,
    pub text_d_ff_sent: Option<usize>,
    pub text_layers_doc: Option<usize>,
    pub text_heads_doc: Option<usize>,
    pub text_d_model_doc: Option<usize>,
    pub text_d_ff_doc: Option<usize>,
    pub max_tokens: Option<usize>,
    pub max_sentences: Option<usize>,
    pub gate_layout: Option<usize>,
    pub gate_writing: Option<usize>,
    pub gate_text: Option<usize>,
    pub lr_text: Option<f64>,
    pub lr_other: Option<f64>,
    pub dropout_text: Option<f64>,
    pub dropout_other: Option<f64>,
    pub batch_size: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub patience: Option<usize>,
    pub max_epochs: Option<usize>,
    pub min_token_freq: Option<usize>,
    pub subnets: Option<String>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CommandError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CommandError::Config(format!("{}: {}", path.display(), e)))
    }
}

/// Fully resolved run settings after merging preset, file, and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub subnets: String,
    pub seed: u64,
    pub min_token_freq: usize,
}

impl Resolved {
    pub fn subnet_set(&self) -> SubnetSet {
        SubnetSet::parse(&self.subnets).expect("resolved subnets parse")
    }

    /// Fingerprint of everything that shapes the model and its training.
    pub fn fingerprint(&self) -> String {
        config_hash(&(&self.model, &self.train, &self.subnets, self.min_token_freq))
    }
}

pub fn resolve_config(
    file: &FileConfig,
    seed_flag: Option<u64>,
    subnets_flag: Option<&str>,
    max_epochs_flag: Option<usize>,
) -> Result<Resolved, CommandError> {
    let mut model = match file.model.as_deref() {
        None | Some("desk-small") => ModelConfig::desk_small(),
        Some("default") => ModelConfig::default(),
        Some(other) => {
            return Err(CommandError::Config(format!(
                "unknown model preset {:?}, expected \"desk-small\" or \"default\"",
                other
            )))
        }
    };
    macro_rules! put {
        ($field:expr, $target:expr) => {
            if let Some(v) = &$field {
                $target = v.clone();
            }
        };
    }
    put!(file.gru_hidden, model.layout.gru_hidden);
    put!(file.kernel_sizes, model.layout.kernel_sizes);
    put!(file.filters_per_kernel, model.layout.filters_per_kernel);
    put!(file.wc_embed_dim, model.writing.embed_dim);
    put!(file.wc_heads, model.writing.heads);
    put!(file.wc_head_dim, model.writing.head_dim);
    put!(file.wc_layers, model.writing.layers);
    put!(file.category_count, model.writing.category_count);
    put!(file.text_layers_sent, model.text.layers_sent);
    put!(file.text_heads_sent, model.text.heads_sent);
    put!(file.text_d_model_sent, model.text.d_model_sent);
    put!(file.text_d_ff_sent, model.text.d_ff_sent);
    put!(file.text_layers_doc, model.text.layers_doc);
    put!(file.text_heads_doc, model.text.heads_doc);
    put!(file.text_d_model_doc, model.text.d_model_doc);
    put!(file.text_d_ff_doc, model.text.d_ff_doc);
    put!(file.max_tokens, model.text.max_tokens);
    put!(file.max_sentences, model.text.max_sentences);
    put!(file.gate_layout, model.fusion.gate_layout);
    put!(file.gate_writing, model.fusion.gate_writing);
    put!(file.gate_text, model.fusion.gate_text);

    let mut train = TrainConfig::default();
    put!(file.lr_text, train.lr_text);
    put!(file.lr_other, train.lr_other);
    put!(file.dropout_text, train.dropout_text);
    put!(file.dropout_other, train.dropout_other);
    put!(file.batch_size, train.batch_size);
    put!(file.beta1, train.beta1);
    put!(file.beta2, train.beta2);
    put!(file.eps, train.eps);
    put!(file.patience, train.patience);
    put!(file.max_epochs, train.max_epochs);
    if let Some(v) = max_epochs_flag {
        train.max_epochs = v;
    }

    let subnets_text = subnets_flag
        .map(str::to_owned)
        .or_else(|| file.subnets.clone())
        .unwrap_or_else(|| "LO,WC,TS".to_string());
    let subnets = SubnetSet::parse(&subnets_text)?;
    let seed = seed_flag.or(file.seed).unwrap_or(0);
    let min_token_freq = file.min_token_freq.unwrap_or(1).max(1);

    model.validate()?;
    train.validate()?;
    Ok(Resolved {
        model,
        train,
        subnets: subnets.label(),
        seed,
        min_token_freq,
    })
}

fn load_file_config(common: &CommonArgs) -> Result<FileConfig, CommandError> {
    match &common.config {
        Some(path) => {
            require_file(path)?;
            FileConfig::load(path)
        }
        None => Ok(FileConfig::default()),
    }
}

fn require_file(path: &Path) -> Result<(), CommandError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CommandError::Invalid(format!("path not found: {}", path.display())))
    }
}

fn create_out_dir(dir: &Path) -> Result<(), CommandError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CommandError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CommandError> {
    let body = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, &body)
}

const BUNDLE_META_FILE: &str = "bundle.json";
const BUNDLE_PARAMS_FILE: &str = "params.ckpt";

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    seed: u64,
    config_hash: String,
    subnets: String,
    config: ModelConfig,
    extractor: FeatureExtractor,
    stats: NormStats,
    vocab: Vocabulary,
}

/// Persist a model bundle as a directory: JSON metadata plus a binary
/// parameter checkpoint.
pub fn save_bundle(
    bundle: &ModelBundle,
    dir: &Path,
    seed: u64,
    config_hash: &str,
) -> Result<(), CommandError> {
    create_out_dir(dir)?;
    let meta = BundleMeta {
        seed,
        config_hash: config_hash.to_string(),
        subnets: bundle.subnets.label(),
        config: bundle.config.clone(),
        extractor: bundle.extractor.clone(),
        stats: bundle.stats.clone(),
        vocab: bundle.vocab.clone(),
    };
    write_json(&dir.join(BUNDLE_META_FILE), &meta)?;
    checkpoint::save(&bundle.store, &dir.join(BUNDLE_PARAMS_FILE))?;
    Ok(())
}

/// Load a bundle saved by [`save_bundle`]; returns the bundle plus the
/// seed and config fingerprint recorded at save time.
pub fn load_bundle(dir: &Path) -> Result<(ModelBundle, u64, String), CommandError> {
    let meta_path = dir.join(BUNDLE_META_FILE);
    require_file(&meta_path)?;
    let text = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: BundleMeta = serde_json::from_str(&text)
        .map_err(|e| CommandError::Config(format!("{}: {}", meta_path.display(), e)))?;
    let params_path = dir.join(BUNDLE_PARAMS_FILE);
    require_file(&params_path)?;
    let store = checkpoint::load(&params_path)?;
    let subnets = SubnetSet::parse(&meta.subnets)?;
    let bundle = ModelBundle {
        config: meta.config,
        subnets,
        store,
        extractor: meta.extractor,
        stats: meta.stats,
        vocab: meta.vocab,
    };
    Ok((bundle, meta.seed, meta.config_hash))
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    version: String,
    seed: u64,
    config_hash: String,
    config: serde_json::Value,
    wall_seconds: f64,
    artifacts: Vec<String>,
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    config_hash: &str,
    config: serde_json::Value,
    started: Instant,
    artifacts: &[&Path],
) -> Result<PathBuf, CommandError> {
    let manifest = RunManifest {
        command: command.to_string(),
        version: format!("v{}", env!("CARGO_PKG_VERSION")),
        seed,
        config_hash: config_hash.to_string(),
        config,
        wall_seconds: started.elapsed().as_secs_f64(),
        artifacts: artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

fn read_labeled_corpus(path: &Path) -> Result<Vec<ArticleDocument>, CommandError> {
    require_file(path)?;
    Ok(read_corpus(path)?)
}

/// One scored article in the predictions artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionOutput {
    pub id: String,
    pub probability: f64,
    pub label: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attention_path: Option<String>,
}

#[derive(Debug, Serialize)]
struct PredictionsArtifact {
    seed: u64,
    config_hash: String,
    predictions: Vec<PredictionOutput>,
}

#[derive(Debug, Serialize)]
struct MetricsArtifact {
    seed: u64,
    config_hash: String,
    subnets: String,
    mean_loss: f64,
    metrics: crate::metrics::MetricsReport,
}

#[derive(Debug, Serialize)]
struct DisturbArtifact {
    config_hash: String,
    report: crate::experiments::DisturbReport,
}

#[derive(Debug, Serialize)]
struct AblationArtifact {
    subnets: String,
    seed: u64,
    config_hash: String,
    best_epoch: usize,
    stopped_early: bool,
    mean_loss: f64,
    metrics: crate::metrics::MetricsReport,
}

#[derive(Debug, Serialize)]
struct CorpusMeta {
    seed: u64,
    config_hash: String,
    kind: String,
    n: usize,
}

/// Execute one parsed command. Errors are reported by the binary as a
/// single `error: ...` line with exit status 1.
pub fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::ExtractFeatures(args) => cmd_extract_features(args),
        Command::Disturb(args) => cmd_disturb(args),
        Command::ExportAttention(args) => cmd_export_attention(args),
        Command::GenSynthetic(args) => cmd_gen_synthetic(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}

fn config_echo(resolved: &Resolved) -> serde_json::Value {
    serde_json::to_value(resolved).expect("resolved config serializes")
}

fn train_bundle(
    resolved: &Resolved,
    train_docs: &[ArticleDocument],
    val_docs: &[ArticleDocument],
) -> Result<(ModelBundle, crate::train::TrainOutcome), CommandError> {
    let subnets = resolved.subnet_set();
    let mut bundle = ModelBundle::fit(
        train_docs,
        &resolved.model,
        subnets,
        resolved.seed,
        resolved.min_token_freq,
    )?;
    let train_samples = bundle.prepare_all(train_docs)?;
    let val_samples = bundle.prepare_all(val_docs)?;
    let outcome = train(
        bundle.store.clone(),
        &train_samples,
        &val_samples,
        &resolved.model,
        subnets,
        &resolved.train,
        resolved.seed,
    )?;
    bundle.store = outcome.store.clone();
    Ok((bundle, outcome))
}

fn cmd_train(args: TrainArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let resolved = resolve_config(
        &file,
        args.common.seed,
        args.subnets.as_deref(),
        args.max_epochs,
    )?;
    let train_docs = read_labeled_corpus(&args.train)?;
    let val_docs = read_labeled_corpus(&args.val)?;
    let fingerprint = resolved.fingerprint();

    let (bundle, outcome) = train_bundle(&resolved, &train_docs, &val_docs)?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let model_dir = out.join("model");
    save_bundle(&bundle, &model_dir, resolved.seed, &fingerprint)?;
    let log_path = out.join("epochs.csv");
    write_text(&log_path, &epoch_log_csv(&outcome.log, resolved.seed, &fingerprint))?;
    let manifest = write_manifest(
        out,
        "train",
        resolved.seed,
        &fingerprint,
        config_echo(&resolved),
        started,
        &[&model_dir.join(BUNDLE_META_FILE), &log_path],
    )?;
    println!(
        "trained {} for {} epochs (best epoch {}); model at {}; manifest {}",
        resolved.subnets,
        outcome.log.len(),
        outcome.best_epoch,
        model_dir.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let (bundle, bundle_seed, bundle_hash) = load_bundle(&args.model)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(bundle_seed);
    let docs = read_labeled_corpus(&args.data)?;
    let samples = bundle.prepare_all(&docs)?;
    let (metrics, mean_loss) = evaluate(&bundle.store, &samples, &bundle.config, bundle.subnets)?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let metrics_path = out.join("metrics.json");
    write_json(
        &metrics_path,
        &MetricsArtifact {
            seed,
            config_hash: bundle_hash.clone(),
            subnets: bundle.subnets.label(),
            mean_loss,
            metrics: metrics.clone(),
        },
    )?;
    let manifest = write_manifest(
        out,
        "eval",
        seed,
        &bundle_hash,
        serde_json::to_value(&bundle.config).expect("config serializes"),
        started,
        &[&metrics_path],
    )?;
    println!(
        "eval {}: accuracy {:.4}, f1 {:.4}, auc {}, loss {:.4}; metrics {}; manifest {}",
        bundle.subnets.label(),
        metrics.accuracy,
        metrics.f1,
        metrics
            .auc
            .map(|a| format!("{:.4}", a))
            .unwrap_or_else(|| "n/a".to_string()),
        mean_loss,
        metrics_path.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let (bundle, bundle_seed, bundle_hash) = load_bundle(&args.model)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(bundle_seed);
    if args.attention && !bundle.subnets.writing {
        return Err(CommandError::Experiment(ExperimentError::WritingInactive));
    }
    let docs = read_labeled_corpus(&args.data)?;
    let samples = bundle.prepare_all(&docs)?;
    let predictions = predict_batched(&bundle.store, &samples, &bundle.config, bundle.subnets, 32)?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let mut outputs = Vec::with_capacity(docs.len());
    for (doc, Prediction { probability, label }) in docs.iter().zip(predictions) {
        let attention_path = if args.attention {
            let export = collect_attention(&bundle, doc)?;
            let dir = out.join("attention").join(&doc.id);
            let index = write_attention(&export, &dir, seed, &bundle_hash)?;
            Some(index.display().to_string())
        } else {
            None
        };
        outputs.push(PredictionOutput {
            id: doc.id.clone(),
            probability,
            label,
            attention_path,
        });
    }
    let predictions_path = out.join("predictions.json");
    write_json(
        &predictions_path,
        &PredictionsArtifact {
            seed,
            config_hash: bundle_hash.clone(),
            predictions: outputs,
        },
    )?;
    let manifest = write_manifest(
        out,
        "predict",
        seed,
        &bundle_hash,
        serde_json::to_value(&bundle.config).expect("config serializes"),
        started,
        &[&predictions_path],
    )?;
    println!(
        "predicted {} articles; predictions {}; manifest {}",
        docs.len(),
        predictions_path.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_extract_features(args: ExtractFeaturesArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let docs = read_labeled_corpus(&args.data)?;
    let extractor = FeatureExtractor::fit(&docs)?;
    let fingerprint = config_hash(&extractor.keywords().collect::<Vec<_>>());

    let out = &args.common.out;
    create_out_dir(out)?;
    let mut csv = format!("# seed={} config={}\n{}\n", seed, fingerprint, csv_header());
    for doc in &docs {
        let record = extractor.extract(doc);
        csv.push_str(&csv_row(doc, &record));
        csv.push('\n');
    }
    let csv_path = out.join("features.csv");
    write_text(&csv_path, &csv)?;
    let manifest = write_manifest(
        out,
        "extract-features",
        seed,
        &fingerprint,
        serde_json::json!({
            "keywords": extractor.keywords().collect::<Vec<_>>(),
            "articles": docs.len(),
        }),
        started,
        &[&csv_path],
    )?;
    println!(
        "extracted features of {} articles; csv {}; manifest {}",
        docs.len(),
        csv_path.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_disturb(args: DisturbArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let (bundle, bundle_seed, bundle_hash) = load_bundle(&args.model)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(bundle_seed);
    let mode = DisturbMode::parse(&args.mode).map_err(CommandError::Invalid)?;
    let docs = read_labeled_corpus(&args.data)?;
    let mut options = DisturbOptions::new(mode, seed);
    if let Some(r) = args.repeats {
        if r == 0 {
            return Err(CommandError::Invalid("repeats must be at least 1".into()));
        }
        options.repeats = r;
    }
    let report = shuffle_disturb(&bundle, &docs, &options)?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let report_path = out.join("disturb.json");
    write_json(
        &report_path,
        &DisturbArtifact {
            config_hash: bundle_hash.clone(),
            report: report.clone(),
        },
    )?;
    let manifest = write_manifest(
        out,
        "disturb",
        seed,
        &bundle_hash,
        serde_json::to_value(&bundle.config).expect("config serializes"),
        started,
        &[&report_path],
    )?;
    println!(
        "disturb mode {} over {} articles: rate {:.4}; report {}; manifest {}",
        report.mode,
        report.sample_count,
        report.successful_disturbance_rate,
        report_path.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_export_attention(args: ExportAttentionArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let (bundle, bundle_seed, bundle_hash) = load_bundle(&args.model)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(bundle_seed);
    let docs = read_labeled_corpus(&args.data)?;
    let doc = match &args.article {
        Some(id) => docs
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| CommandError::Invalid(format!("article {:?} not in {}", id, args.data.display())))?,
        None => docs
            .first()
            .ok_or_else(|| CommandError::Invalid(format!("empty corpus: {}", args.data.display())))?,
    };
    let export = collect_attention(&bundle, doc)?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let index_path = write_attention(&export, out, seed, &bundle_hash)?;
    let manifest = write_manifest(
        out,
        "export-attention",
        seed,
        &bundle_hash,
        serde_json::to_value(&bundle.config).expect("config serializes"),
        started,
        &[&index_path],
    )?;
    println!(
        "exported attention of {} ({} layers x {} heads); index {}; manifest {}",
        doc.id,
        export.mean_matrices.len(),
        export.head_matrices.first().map_or(0, |l| l.len()),
        index_path.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_gen_synthetic(args: GenSyntheticArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let kind = CorpusKind::parse(&args.spec).map_err(CommandError::Invalid)?;
    if args.n == 0 {
        return Err(CommandError::Invalid("n must be at least 1".into()));
    }
    let docs = generate(kind, args.n, seed);

    let out = &args.common.out;
    create_out_dir(out)?;
    let corpus_path = out.join(format!("{}.jsonl", kind.name()));
    write_corpus(&corpus_path, &docs)?;
    let meta = CorpusMeta {
        seed,
        config_hash: config_hash(&(kind.name(), args.n)),
        kind: kind.name().to_string(),
        n: args.n,
    };
    let meta_path = out.join(format!("{}.meta.json", kind.name()));
    write_json(&meta_path, &meta)?;
    let manifest = write_manifest(
        out,
        "gen-synthetic",
        seed,
        &meta.config_hash,
        serde_json::json!({"spec": kind.name(), "n": args.n}),
        started,
        &[&corpus_path, &meta_path],
    )?;
    println!(
        "generated {} {} articles; corpus {}; manifest {}",
        docs.len(),
        kind.name(),
        corpus_path.display(),
        manifest.display()
    );
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CommandError> {
    let started = Instant::now();
    let file = load_file_config(&args.common)?;
    let resolved = resolve_config(&file, args.common.seed, Some(&args.subnets), None)?;
    let train_docs = read_labeled_corpus(&args.train)?;
    let val_docs = read_labeled_corpus(&args.val)?;
    let test_docs = read_labeled_corpus(&args.test)?;
    let fingerprint = resolved.fingerprint();

    let (bundle, outcome) = train_bundle(&resolved, &train_docs, &val_docs)?;
    let test_samples = bundle.prepare_all(&test_docs)?;
    let (metrics, mean_loss) = evaluate(&bundle.store, &test_samples, &bundle.config, bundle.subnets)?;

    let out = &args.common.out;
    create_out_dir(out)?;
    let report_path = out.join("ablation.json");
    write_json(
        &report_path,
        &AblationArtifact {
            subnets: resolved.subnets.clone(),
            seed: resolved.seed,
            config_hash: fingerprint.clone(),
            best_epoch: outcome.best_epoch,
            stopped_early: outcome.stopped_early,
            mean_loss,
            metrics: metrics.clone(),
        },
    )?;
    let log_path = out.join("epochs.csv");
    write_text(&log_path, &epoch_log_csv(&outcome.log, resolved.seed, &fingerprint))?;
    let manifest = write_manifest(
        out,
        "ablate",
        resolved.seed,
        &fingerprint,
        config_echo(&resolved),
        started,
        &[&report_path, &log_path],
    )?;
    println!(
        "ablation {}: test accuracy {:.4}, auc {}; report {}; manifest {}",
        resolved.subnets,
        metrics.accuracy,
        metrics
            .auc
            .map(|a| format!("{:.4}", a))
            .unwrap_or_else(|| "n/a".to_string()),
        report_path.display(),
        manifest.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::new_store;

    fn desk_resolved(seed: u64, subnets: &str) -> Resolved {
        resolve_config(&FileConfig::default(), Some(seed), Some(subnets), None).unwrap()
    }

    #[test]
    fn defaults_resolve_to_the_desk_preset_and_full_model() {
        let r = resolve_config(&FileConfig::default(), None, None, None).unwrap();
        assert_eq!(r.model, ModelConfig::desk_small());
        assert_eq!(r.train, TrainConfig::default());
        assert_eq!(r.subnets, "LO,WC,TS");
        assert_eq!(r.seed, 0);
        assert_eq!(r.min_token_freq, 1);
    }

    #[test]
    fn file_values_override_preset_and_flags_override_file() {
        let file: FileConfig = serde_json::from_str(
            r#"{"model":"default","gru_hidden":32,"max_epochs":9,"subnets":"LO","seed":5,"lr_other":0.01}"#,
        )
        .unwrap();
        let r = resolve_config(&file, None, None, None).unwrap();
        assert_eq!(r.model.layout.gru_hidden, 32);
        assert_eq!(r.model.layout.kernel_sizes, vec![2, 5, 10, 20]);
        assert_eq!(r.train.max_epochs, 9);
        assert_eq!(r.train.lr_other, 0.01);
        assert_eq!(r.subnets, "LO");
        assert_eq!(r.seed, 5);

        let r = resolve_config(&file, Some(11), Some("WC,TS"), Some(3)).unwrap();
        assert_eq!(r.seed, 11);
        assert_eq!(r.subnets, "WC,TS");
        assert_eq!(r.train.max_epochs, 3);
    }

    #[test]
    fn unknown_config_keys_and_bad_values_are_rejected() {
        let parsed: Result<FileConfig, _> = serde_json::from_str(r#"{"gru_hiden": 4}"#);
        assert!(parsed.is_err());

        let file: FileConfig = serde_json::from_str(r#"{"batch_size":0}"#).unwrap();
        let err = resolve_config(&file, None, None, None).unwrap_err();
        assert!(err.to_string().contains("batch_size"), "{}", err);

        let file: FileConfig = serde_json::from_str(r#"{"model":"huge"}"#).unwrap();
        let err = resolve_config(&file, None, None, None).unwrap_err();
        assert!(err.to_string().contains("unknown model preset"), "{}", err);

        let err = resolve_config(&FileConfig::default(), None, Some("XX"), None).unwrap_err();
        assert!(err.to_string().contains("unknown subnetwork"), "{}", err);
    }

    #[test]
    fn fingerprint_tracks_model_training_and_subnet_changes() {
        let base = desk_resolved(1, "LO,WC,TS");
        assert_eq!(base.fingerprint().len(), 12);
        assert_eq!(base.fingerprint(), desk_resolved(9, "LO,WC,TS").fingerprint());

        let mut other = base.clone();
        other.train.lr_other = 0.5;
        assert_ne!(base.fingerprint(), other.fingerprint());
        assert_ne!(base.fingerprint(), desk_resolved(1, "LO").fingerprint());
    }

    #[test]
    fn bundles_round_trip_through_disk() {
        let docs = generate(CorpusKind::FeatureSignal, 10, 3);
        let resolved = desk_resolved(4, "LO,WC");
        let bundle = ModelBundle::fit(&docs, &resolved.model, resolved.subnet_set(), 4, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path(), 4, "abcdefabcdef").unwrap();
        let (loaded, seed, hash) = load_bundle(dir.path()).unwrap();
        assert_eq!(seed, 4);
        assert_eq!(hash, "abcdefabcdef");
        assert_eq!(loaded.subnets, bundle.subnets);
        assert_eq!(loaded.config, bundle.config);
        assert_eq!(loaded.vocab, bundle.vocab);
        assert_eq!(loaded.stats, bundle.stats);
        let names_a: Vec<&str> = bundle.store.names().collect();
        let names_b: Vec<&str> = loaded.store.names().collect();
        assert_eq!(names_a, names_b);
        for name in names_a {
            let rounded: Vec<f64> = bundle
                .store
                .value(name)
                .data()
                .iter()
                .map(|&v| v as f32 as f64)
                .collect();
            assert_eq!(rounded, loaded.store.value(name).data(), "{}", name);
        }
    }

    #[test]
    fn missing_bundle_directory_is_a_single_line_error() {
        let err = load_bundle(Path::new("/nonexistent/model")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("path not found"), "{}", msg);
        assert!(!msg.contains('\n'));
    }

    #[test]
    fn prediction_output_serializes_with_optional_attention_path() {
        let with = PredictionOutput {
            id: "a".into(),
            probability: 0.75,
            label: 1,
            attention_path: Some("x/index.json".into()),
        };
        let without = PredictionOutput {
            id: "b".into(),
            probability: 0.25,
            label: 0,
            attention_path: None,
        };
        let j1 = serde_json::to_string(&with).unwrap();
        let j2 = serde_json::to_string(&without).unwrap();
        assert!(j1.contains("attention_path"));
        assert!(!j2.contains("attention_path"));
        assert!(j2.contains("\"probability\":0.25"));
    }

    #[test]
    fn store_names_survive_bundle_persistence_for_every_subset() {
        for label in ["LO", "WC", "TS", "LO,TS"] {
            let resolved = desk_resolved(2, label);
            let store = new_store(&resolved.model, resolved.subnet_set(), 50, 2);
            let docs = generate(CorpusKind::FeatureSignal, 6, 1);
            let mut bundle = ModelBundle::fit(&docs, &resolved.model, resolved.subnet_set(), 2, 1).unwrap();
            bundle.store = store;
            let dir = tempfile::tempdir().unwrap();
            save_bundle(&bundle, dir.path(), 2, "000000000000").unwrap();
            let (loaded, _, _) = load_bundle(dir.path()).unwrap();
            assert_eq!(
                bundle.store.names().collect::<Vec<_>>(),
                loaded.store.names().collect::<Vec<_>>(),
                "{}",
                label
            );
        }
    }
}
