//! Joint model: per-subnetwork gates, concatenation, classifier head.
//!
//! Each active subnetwork produces one representation row per document.
//! A gate (plain affine layer, no activation) resizes each representation,
//! the gated rows concatenate, and an affine head plus sigmoid yields the
//! positive-class probability. Labels threshold at 0.5 with ties going to
//! the positive class. The batch loss is binary cross entropy averaged
//! over the batch.
//!
//! Ablation variants cascade only the subnetworks named in a
//! [`SubnetSet`]; inactive subnetworks contribute no parameters and the
//! head input shrinks to the sum of active gate widths.

use crate::article::{
    split_sentences, tokenize, ArticleDocument, ArticleError, TokenizedSentence, Vocabulary,
};
use crate::config::{ModelConfig, SubnetSet};
use crate::features::{
    apply_norm, extract_layout_vectors, fit_norm_stats, FeatureError, FeatureExtractor,
    FeatureRecord, NormStats, LAYOUT_DIM,
};
use crate::nn::{bind, Binding, Graph, NodeId, ParameterStore};
use crate::subnet::{layout, text, writing, SubnetError};

/// Everything the network needs about one document, preprocessed.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: Option<u8>,
    pub layout: Vec<Vec<f64>>,
    pub features: FeatureRecord,
    pub tokens: Vec<TokenizedSentence>,
}

/// Split, tokenize, extract and normalize: one document into one sample.
pub fn prepare_sample(
    doc: &mut ArticleDocument,
    extractor: &FeatureExtractor,
    stats: &NormStats,
    vocab: &Vocabulary,
    cfg: &ModelConfig,
) -> Result<Sample, ArticleError> {
    split_sentences(doc, cfg.text.max_sentences);
    tokenize(doc, vocab, cfg.text.max_tokens)?;
    let record = apply_norm(&extractor.extract(doc), stats);
    Ok(Sample {
        id: doc.id.clone(),
        label: doc.label,
        layout: extract_layout_vectors(doc),
        features: record,
        tokens: doc.tokens.clone(),
    })
}

/// Width of the concatenated gate outputs feeding the head.
pub fn head_input_dim(cfg: &ModelConfig, subnets: SubnetSet) -> usize {
    let mut dim = 0;
    if subnets.layout {
        dim += cfg.fusion.gate_layout;
    }
    if subnets.writing {
        dim += cfg.fusion.gate_writing;
    }
    if subnets.text {
        dim += cfg.fusion.gate_text;
    }
    dim
}

/// Declare every parameter of the model variant: active subnetworks,
/// their gates, and the classifier head.
pub fn init_params(
    store: &mut ParameterStore,
    cfg: &ModelConfig,
    subnets: SubnetSet,
    vocab_size: usize,
) {
    if subnets.layout {
        layout::init_params(store, &cfg.layout, LAYOUT_DIM);
        store.weight("fuse.gate_l.w", cfg.layout.output_dim(), cfg.fusion.gate_layout);
        store.bias("fuse.gate_l.b", cfg.fusion.gate_layout);
    }
    if subnets.writing {
        writing::init_params(store, &cfg.writing);
        store.weight("fuse.gate_w.w", cfg.writing.output_dim(), cfg.fusion.gate_writing);
        store.bias("fuse.gate_w.b", cfg.fusion.gate_writing);
    }
    if subnets.text {
        text::init_params(store, &cfg.text, vocab_size);
        store.weight("fuse.gate_d.w", cfg.text.output_dim(), cfg.fusion.gate_text);
        store.bias("fuse.gate_d.b", cfg.fusion.gate_text);
    }
    store.weight("fuse.head.w", head_input_dim(cfg, subnets), 1);
    store.bias("fuse.head.b", 1);
}

/// Forward-pass switches: inference is dropout-free; training carries the
/// two dropout rates and the seed for their noise.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Infer,
    Train {
        dropout_text: f64,
        dropout_other: f64,
        seed: u64,
    },
}

/// A built batch graph with handles into it.
pub struct BatchForward {
    pub graph: Graph,
    pub binding: Binding,
    /// One 1x1 sigmoid output per sample, in batch order.
    pub probabilities: Vec<NodeId>,
    /// Batch-mean binary cross entropy; present when every sample is labeled.
    pub loss: Option<NodeId>,
    /// Writing-subnetwork attention nodes per sample as [layer][head],
    /// populated only when the writing subnetwork is active.
    pub attention: Vec<Vec<Vec<NodeId>>>,
}

impl BatchForward {
    pub fn probability(&self, index: usize) -> f64 {
        self.graph.value(self.probabilities[index]).item()
    }
}

/// Gate each representation, concatenate, classify. `parts` holds
/// (representation, gate weight, gate bias) per active subnetwork, in
/// layout/writing/text order. Returns the 1x1 probability node.
pub fn fuse_and_predict(
    g: &mut Graph,
    parts: &[(NodeId, NodeId, NodeId)],
    head_w: NodeId,
    head_b: NodeId,
) -> NodeId {
    assert!(!parts.is_empty(), "fusion over zero subnetworks");
    let gated: Vec<NodeId> = parts.iter().map(|&(h, w, b)| g.affine(h, w, b)).collect();
    let fused = g.concat_cols(&gated);
    let logit = g.affine(fused, head_w, head_b);
    g.sigmoid(logit)
}

pub fn forward_batch(
    store: &ParameterStore,
    samples: &[Sample],
    cfg: &ModelConfig,
    subnets: SubnetSet,
    mode: Mode,
) -> Result<BatchForward, SubnetError> {
    assert!(!samples.is_empty(), "forward over an empty batch");
    let mut g = Graph::new();
    let binding = bind(store, &mut g);
    let (mut ctx, dropout_other) = match mode {
        Mode::Infer => (text::ForwardCtx::inference(), 0.0),
        Mode::Train {
            dropout_text,
            dropout_other,
            seed,
        } => (text::ForwardCtx::training(dropout_text, seed), dropout_other),
    };

    let mut probabilities = Vec::with_capacity(samples.len());
    let mut attention = Vec::new();
    for sample in samples {
        let mut parts = Vec::new();
        if subnets.layout {
            let h = layout::forward(&mut g, &binding, &sample.layout, &cfg.layout)?;
            let h = g.dropout(h, dropout_other, ctx.training, &mut ctx.rng);
            parts.push((h, binding.id("fuse.gate_l.w"), binding.id("fuse.gate_l.b")));
        }
        if subnets.writing {
            let fwd = writing::forward(&mut g, &binding, &sample.features, &cfg.writing)?;
            attention.push(fwd.attention);
            let h = g.dropout(fwd.output, dropout_other, ctx.training, &mut ctx.rng);
            parts.push((h, binding.id("fuse.gate_w.w"), binding.id("fuse.gate_w.b")));
        }
        if subnets.text {
            let h = text::forward(&mut g, &binding, &sample.tokens, &cfg.text, &mut ctx)?;
            let h = g.dropout(h, dropout_other, ctx.training, &mut ctx.rng);
            parts.push((h, binding.id("fuse.gate_d.w"), binding.id("fuse.gate_d.b")));
        }
        let head_w = binding.id("fuse.head.w");
        let head_b = binding.id("fuse.head.b");
        probabilities.push(fuse_and_predict(&mut g, &parts, head_w, head_b));
    }

    let loss = if samples.iter().all(|s| s.label.is_some()) {
        let stacked = g.stack_rows(&probabilities);
        let targets: Vec<f64> = samples
            .iter()
            .map(|s| f64::from(s.label.unwrap()))
            .collect();
        Some(g.binary_cross_entropy(stacked, &targets))
    } else {
        None
    };

    Ok(BatchForward {
        graph: g,
        binding,
        probabilities,
        loss,
        attention,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: u8,
}

pub fn label_of(probability: f64) -> u8 {
    u8::from(probability >= 0.5)
}

/// Score a single sample without dropout.
pub fn predict_one(
    store: &ParameterStore,
    sample: &Sample,
    cfg: &ModelConfig,
    subnets: SubnetSet,
) -> Result<Prediction, SubnetError> {
    let fwd = forward_batch(store, std::slice::from_ref(sample), cfg, subnets, Mode::Infer)?;
    let probability = fwd.probability(0);
    Ok(Prediction {
        probability,
        label: label_of(probability),
    })
}

/// Score samples in fixed-size batches without dropout.
pub fn predict_batched(
    store: &ParameterStore,
    samples: &[Sample],
    cfg: &ModelConfig,
    subnets: SubnetSet,
    batch_size: usize,
) -> Result<Vec<Prediction>, SubnetError> {
    assert!(batch_size >= 1);
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size) {
        let fwd = forward_batch(store, chunk, cfg, subnets, Mode::Infer)?;
        for i in 0..chunk.len() {
            let probability = fwd.probability(i);
            out.push(Prediction {
                probability,
                label: label_of(probability),
            });
        }
    }
    Ok(out)
}

/// Fresh parameters for a model variant, seeded.
pub fn new_store(cfg: &ModelConfig, subnets: SubnetSet, vocab_size: usize, seed: u64) -> ParameterStore {
    let mut store = ParameterStore::new(seed);
    init_params(&mut store, cfg, subnets, vocab_size);
    store
}

/// A trained model plus everything needed to turn a raw document into its
/// input: configuration, active subnetworks, parameters, the fitted
/// feature extractor, normalization statistics, and the token table.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub subnets: SubnetSet,
    pub store: ParameterStore,
    pub extractor: FeatureExtractor,
    pub stats: NormStats,
    pub vocab: Vocabulary,
}

impl ModelBundle {
    /// Fit the preprocessing pipeline on `docs` (keyword list, feature
    /// normalization, token table) and pair it with freshly initialized
    /// parameters.
    pub fn fit(
        docs: &[ArticleDocument],
        cfg: &ModelConfig,
        subnets: SubnetSet,
        seed: u64,
        min_token_freq: usize,
    ) -> Result<ModelBundle, FeatureError> {
        let (extractor, stats, vocab) = fit_pipeline(docs, cfg, min_token_freq)?;
        let store = new_store(cfg, subnets, vocab.len(), seed);
        Ok(ModelBundle {
            config: cfg.clone(),
            subnets,
            store,
            extractor,
            stats,
            vocab,
        })
    }

    pub fn prepare(&self, doc: &ArticleDocument) -> Result<Sample, ArticleError> {
        let mut doc = doc.clone();
        prepare_sample(&mut doc, &self.extractor, &self.stats, &self.vocab, &self.config)
    }

    pub fn prepare_all(&self, docs: &[ArticleDocument]) -> Result<Vec<Sample>, ArticleError> {
        docs.iter().map(|d| self.prepare(d)).collect()
    }

    pub fn predict(&self, sample: &Sample) -> Result<Prediction, SubnetError> {
        predict_one(&self.store, sample, &self.config, self.subnets)
    }
}

/// Fit the document-independent preprocessing state on a training corpus:
/// the corpus keyword list, feature z-score statistics, and the token
/// table over split sentences.
pub fn fit_pipeline(
    docs: &[ArticleDocument],
    cfg: &ModelConfig,
    min_token_freq: usize,
) -> Result<(FeatureExtractor, NormStats, Vocabulary), FeatureError> {
    let extractor = FeatureExtractor::fit(docs)?;
    let records: Vec<FeatureRecord> = docs.iter().map(|d| extractor.extract(d)).collect();
    let stats = fit_norm_stats(&records)?;
    let mut sentences = Vec::new();
    for doc in docs {
        let mut d = doc.clone();
        split_sentences(&mut d, cfg.text.max_sentences);
        sentences.append(&mut d.sentences);
    }
    let vocab = Vocabulary::build(sentences.iter().map(|s| s.as_str()), min_token_freq);
    Ok((extractor, stats, vocab))
}
