//! Order-disturbance probes and attention-matrix export.
//!
//! The disturbance experiment measures how much a trained model relies on
//! ordering: among labeled-positive documents the model currently gets
//! right, it applies uniform random permutations to the block sequence,
//! the sentence sequence, or both, and reports the fraction of predictions
//! that flip to negative, averaged over seeded repeats.
//!
//! Each permutation touches exactly one input channel. A block shuffle
//! reorders blocks, rewrites ordinals and top offsets into a consistent
//! page, and re-derives the per-block layout vectors; the sentence
//! sequence is left as originally split. A sentence shuffle permutes the
//! tokenized body sentences (the title stays first) and leaves layout
//! untouched. Writing features are order-free by construction, which this
//! module asserts on every shuffled document rather than assumes.
//!
//! Attention export runs the writing subnetwork on one document and writes
//! its field-interaction attention as one CSV per head plus a head-averaged
//! CSV per layer, rows and columns indexed by the 1-based feature catalog.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::Serialize;

use crate::article::{reflow_blocks, ArticleDocument, ArticleError};
use crate::features::FEATURE_COUNT;
use crate::model::{forward_batch, predict_batched, Mode, ModelBundle, Sample};
use crate::nn::Tensor;
use crate::subnet::SubnetError;

const PREDICT_BATCH: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("empty disturbance base")]
    EmptyBase,
    #[error("attention export requires the writing subnetwork")]
    WritingInactive,
    #[error(transparent)]
    Article(#[from] ArticleError),
    #[error(transparent)]
    Subnet(#[from] SubnetError),
    #[error("attention export io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbMode {
    Sentences,
    Blocks,
    Both,
}

impl DisturbMode {
    pub const ALL: [DisturbMode; 3] = [DisturbMode::Sentences, DisturbMode::Blocks, DisturbMode::Both];

    pub fn name(self) -> &'static str {
        match self {
            DisturbMode::Sentences => "sentences",
            DisturbMode::Blocks => "blocks",
            DisturbMode::Both => "both",
        }
    }

    pub fn parse(name: &str) -> Result<DisturbMode, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| format!("unknown disturbance mode {:?}; known modes: sentences, blocks, both", name))
    }

    fn touches_blocks(self) -> bool {
        matches!(self, DisturbMode::Blocks | DisturbMode::Both)
    }

    fn touches_sentences(self) -> bool {
        matches!(self, DisturbMode::Sentences | DisturbMode::Both)
    }
}

/// Every (repeat, document) pair draws from its own seeded random stream,
/// and block permutations are always drawn before sentence permutations,
/// so the `both` mode applies exactly the block shuffles of the `blocks`
/// mode plus sentence shuffles on top.
#[derive(Debug, Clone, Copy)]
pub struct DisturbOptions {
    pub mode: DisturbMode,
    pub repeats: usize,
    pub seed: u64,
}

impl DisturbOptions {
    pub fn new(mode: DisturbMode, seed: u64) -> DisturbOptions {
        DisturbOptions {
            mode,
            repeats: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisturbReport {
    pub mode: String,
    pub repeats: usize,
    pub seed: u64,
    /// Correctly-predicted positive documents the shuffles act on.
    pub sample_count: usize,
    /// Fraction of base documents whose prediction flips to negative,
    /// averaged over repeats.
    pub successful_disturbance_rate: f64,
    pub per_repeat_rates: Vec<f64>,
}

/// Run the disturbance protocol for one mode against a trained model.
pub fn shuffle_disturb(
    bundle: &ModelBundle,
    docs: &[ArticleDocument],
    options: &DisturbOptions,
) -> Result<DisturbReport, ExperimentError> {
    let mut predict = |samples: &[Sample]| -> Result<Vec<u8>, ExperimentError> {
        let predictions = predict_batched(
            &bundle.store,
            samples,
            &bundle.config,
            bundle.subnets,
            PREDICT_BATCH,
        )?;
        Ok(predictions.into_iter().map(|p| p.label).collect())
    };
    let prepare = |doc: &ArticleDocument| bundle.prepare(doc).map_err(ExperimentError::from);
    disturb_core(docs, &prepare, &mut predict, options, &mut uniform_permutation)
}

/// Uniformly random permutation of `0..n`.
fn uniform_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Protocol body with the predictor and the permutation source injected,
/// so tests can force identity permutations or analytic model doubles.
fn disturb_core(
    docs: &[ArticleDocument],
    prepare: &dyn Fn(&ArticleDocument) -> Result<Sample, ExperimentError>,
    predict: &mut dyn FnMut(&[Sample]) -> Result<Vec<u8>, ExperimentError>,
    options: &DisturbOptions,
    permute: &mut dyn FnMut(usize, &mut ChaCha8Rng) -> Vec<usize>,
) -> Result<DisturbReport, ExperimentError> {
    assert!(options.repeats >= 1, "disturbance needs at least one repeat");
    let positives: Vec<&ArticleDocument> = docs.iter().filter(|d| d.label == Some(1)).collect();
    let mut base: Vec<(&ArticleDocument, Sample)> = Vec::new();
    if !positives.is_empty() {
        let samples: Vec<Sample> = positives
            .iter()
            .map(|d| prepare(d))
            .collect::<Result<_, _>>()?;
        let labels = predict(&samples)?;
        for ((doc, sample), label) in positives.into_iter().zip(samples).zip(labels) {
            if label == 1 {
                base.push((doc, sample));
            }
        }
    }
    if base.is_empty() {
        return Err(ExperimentError::EmptyBase);
    }

    let mut per_repeat_rates = Vec::with_capacity(options.repeats);
    for repeat in 0..options.repeats {
        let disturbed: Vec<Sample> = base
            .iter()
            .enumerate()
            .map(|(index, (doc, sample))| {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(((repeat as u64 + 1) << 32) | index as u64);
                disturb_sample(doc, sample, options.mode, &mut rng, prepare, permute)
            })
            .collect::<Result<_, _>>()?;
        let labels = predict(&disturbed)?;
        let flips = labels.iter().filter(|&&l| l == 0).count();
        per_repeat_rates.push(flips as f64 / base.len() as f64);
    }
    let successful_disturbance_rate =
        per_repeat_rates.iter().sum::<f64>() / per_repeat_rates.len() as f64;
    Ok(DisturbReport {
        mode: options.mode.name().to_string(),
        repeats: options.repeats,
        seed: options.seed,
        sample_count: base.len(),
        successful_disturbance_rate,
        per_repeat_rates,
    })
}

/// Apply the mode's permutations to one document's model inputs.
fn disturb_sample(
    doc: &ArticleDocument,
    sample: &Sample,
    mode: DisturbMode,
    rng: &mut ChaCha8Rng,
    prepare: &dyn Fn(&ArticleDocument) -> Result<Sample, ExperimentError>,
    permute: &mut dyn FnMut(usize, &mut ChaCha8Rng) -> Vec<usize>,
) -> Result<Sample, ExperimentError> {
    let mut disturbed = sample.clone();
    if mode.touches_blocks() {
        let perm = permute(doc.blocks.len(), rng);
        let mut shuffled = doc.clone();
        shuffled.blocks = perm.iter().map(|&i| doc.blocks[i].clone()).collect();
        reflow_blocks(&mut shuffled.blocks);
        let reshuffled = prepare(&shuffled)?;
        assert_eq!(
            sample.features, reshuffled.features,
            "block shuffle changed order-free writing features of {}",
            doc.id
        );
        disturbed.layout = reshuffled.layout;
    }
    if mode.touches_sentences() {
        if disturbed.tokens.len() > 1 {
            let perm = permute(disturbed.tokens.len() - 1, rng);
            let body = &sample.tokens[1..];
            for (slot, &src) in disturbed.tokens[1..].iter_mut().zip(perm.iter()) {
                *slot = body[src].clone();
            }
        }
    }
    Ok(disturbed)
}

/// Attention matrices of the writing subnetwork for one document:
/// per-layer per-head rows plus the head average, each sized by the
/// feature catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionExport {
    /// `[layer][head]`, each matrix `FEATURE_COUNT x FEATURE_COUNT`.
    pub head_matrices: Vec<Vec<Tensor>>,
    /// Head-averaged matrix per layer.
    pub mean_matrices: Vec<Tensor>,
    pub article_id: String,
}

pub fn collect_attention(
    bundle: &ModelBundle,
    doc: &ArticleDocument,
) -> Result<AttentionExport, ExperimentError> {
    if !bundle.subnets.writing {
        return Err(ExperimentError::WritingInactive);
    }
    let sample = bundle.prepare(doc)?;
    let fwd = forward_batch(
        &bundle.store,
        std::slice::from_ref(&sample),
        &bundle.config,
        bundle.subnets,
        Mode::Infer,
    )?;
    let mut head_matrices = Vec::new();
    let mut mean_matrices = Vec::new();
    for layer in &fwd.attention[0] {
        let heads: Vec<Tensor> = layer.iter().map(|&n| fwd.graph.value(n).clone()).collect();
        let mut mean = Tensor::zeros(FEATURE_COUNT, FEATURE_COUNT);
        for head in &heads {
            assert_eq!(head.shape(), (FEATURE_COUNT, FEATURE_COUNT));
            for (slot, v) in mean.data_mut().iter_mut().zip(head.data()) {
                *slot += v;
            }
        }
        let scale = 1.0 / heads.len() as f64;
        for slot in mean.data_mut() {
            *slot *= scale;
        }
        head_matrices.push(heads);
        mean_matrices.push(mean);
    }
    Ok(AttentionExport {
        head_matrices,
        mean_matrices,
        article_id: doc.id.clone(),
    })
}

#[derive(Debug, Serialize)]
struct AttentionIndex {
    article_id: String,
    seed: u64,
    config_hash: String,
    layers: usize,
    heads: usize,
    fields: usize,
    mean_files: Vec<String>,
    head_files: Vec<Vec<String>>,
}

fn matrix_csv(matrix: &Tensor, seed: u64, config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# seed={} config={}", seed, config_hash);
    let mut header = String::from("field");
    for c in 1..=FEATURE_COUNT {
        let _ = write!(header, ",{}", c);
    }
    let _ = writeln!(out, "{}", header);
    for r in 0..FEATURE_COUNT {
        let _ = write!(out, "{}", r + 1);
        for c in 0..FEATURE_COUNT {
            let _ = write!(out, ",{:.12e}", matrix.at(r, c));
        }
        out.push('\n');
    }
    out
}

/// Write one CSV per head, one head-averaged CSV per layer, and an index
/// JSON naming them all. Returns the index path.
pub fn write_attention(
    export: &AttentionExport,
    dir: &Path,
    seed: u64,
    config_hash: &str,
) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut mean_files = Vec::new();
    let mut head_files = Vec::new();
    for (l, mean) in export.mean_matrices.iter().enumerate() {
        let name = format!("attention_layer{}_mean.csv", l + 1);
        fs::write(dir.join(&name), matrix_csv(mean, seed, config_hash))?;
        mean_files.push(name);
        let mut layer_files = Vec::new();
        for (h, head) in export.head_matrices[l].iter().enumerate() {
            let name = format!("attention_layer{}_head{}.csv", l + 1, h + 1);
            fs::write(dir.join(&name), matrix_csv(head, seed, config_hash))?;
            layer_files.push(name);
        }
        head_files.push(layer_files);
    }
    let index = AttentionIndex {
        article_id: export.article_id.clone(),
        seed,
        config_hash: config_hash.to_string(),
        layers: export.mean_matrices.len(),
        heads: export.head_matrices.first().map_or(0, |l| l.len()),
        fields: FEATURE_COUNT,
        mean_files,
        head_files,
    };
    let index_path = dir.join("index.json");
    let body = serde_json::to_string_pretty(&index).expect("attention index serializes");
    fs::write(&index_path, body)?;
    Ok(index_path)
}

/// Parse one matrix back out of its CSV text (comment and header lines
/// skipped); used by tests and downstream tooling.
pub fn parse_matrix_csv(text: &str) -> Tensor {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("field") || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|c| c.parse().expect("matrix cell parses"))
            .collect();
        rows.push(cells);
    }
    Tensor::from_rows(&rows)
}
