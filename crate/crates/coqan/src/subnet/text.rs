//! Text semantics subnetwork.
//!
//! A two-level transformer encoder. The sentence level embeds token ids,
//! adds learned positions, and runs post-norm transformer blocks; the
//! head-marker position of the final block is the sentence vector. The
//! document level stacks sentence vectors, adds a second learned position
//! table, and runs two independently parameterized block stacks: one over
//! the original sentence order, one over the reversed order. The outputs
//! at position zero of both stacks concatenate into the document vector,
//! so the forward stack reads the document from its opening and the
//! backward stack from its closing.
//!
//! Attention here scales scores by 1/sqrt(d_head) before the softmax,
//! unlike the writing subnetwork which uses raw inner products.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::article::TokenizedSentence;
use crate::config::TextConfig;
use crate::nn::{Binding, Graph, NodeId, ParameterStore};

use super::SubnetError;

/// Runtime switches a forward pass needs beyond parameters: whether
/// dropout is live and the noise source that drives it.
pub struct ForwardCtx {
    pub training: bool,
    pub dropout: f64,
    pub rng: ChaCha8Rng,
}

impl ForwardCtx {
    pub fn inference() -> Self {
        ForwardCtx {
            training: false,
            dropout: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn training(dropout: f64, seed: u64) -> Self {
        ForwardCtx {
            training: true,
            dropout,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

fn init_block(store: &mut ParameterStore, prefix: &str, d_model: usize, heads: usize, d_ff: usize) {
    let d_head = d_model / heads;
    for h in 0..heads {
        for proj in ["q", "k", "v"] {
            store.weight(&format!("{}.attn.h{}.w{}", prefix, h, proj), d_model, d_head);
            store.bias(&format!("{}.attn.h{}.b{}", prefix, h, proj), d_head);
        }
    }
    store.weight(&format!("{}.attn.wo", prefix), d_model, d_model);
    store.bias(&format!("{}.attn.bo", prefix), d_model);
    store.gain(&format!("{}.ln1.gain", prefix), d_model);
    store.bias(&format!("{}.ln1.bias", prefix), d_model);
    store.weight(&format!("{}.ff.w1", prefix), d_model, d_ff);
    store.bias(&format!("{}.ff.b1", prefix), d_ff);
    store.weight(&format!("{}.ff.w2", prefix), d_ff, d_model);
    store.bias(&format!("{}.ff.b2", prefix), d_model);
    store.gain(&format!("{}.ln2.gain", prefix), d_model);
    store.bias(&format!("{}.ln2.bias", prefix), d_model);
}

pub fn init_params(store: &mut ParameterStore, cfg: &TextConfig, vocab_size: usize) {
    store.weight("text.tok_embed", vocab_size, cfg.d_model_sent);
    store.weight("text.pos_sent", cfg.max_tokens, cfg.d_model_sent);
    store.weight("text.pos_doc", cfg.max_sentences, cfg.d_model_doc);
    for l in 0..cfg.layers_sent {
        init_block(
            store,
            &format!("text.sent.{}", l),
            cfg.d_model_sent,
            cfg.heads_sent,
            cfg.d_ff_sent,
        );
    }
    for l in 0..cfg.layers_doc {
        init_block(
            store,
            &format!("text.doc_fwd.{}", l),
            cfg.d_model_doc,
            cfg.heads_doc,
            cfg.d_ff_doc,
        );
        init_block(
            store,
            &format!("text.doc_bwd.{}", l),
            cfg.d_model_doc,
            cfg.heads_doc,
            cfg.d_ff_doc,
        );
    }
}

pub struct AttnHead {
    pub wq: NodeId,
    pub bq: NodeId,
    pub wk: NodeId,
    pub bk: NodeId,
    pub wv: NodeId,
    pub bv: NodeId,
}

/// Node ids for one transformer block's parameters.
pub struct BlockParams {
    pub heads: Vec<AttnHead>,
    pub wo: NodeId,
    pub bo: NodeId,
    pub ln1_gain: NodeId,
    pub ln1_bias: NodeId,
    pub ff_w1: NodeId,
    pub ff_b1: NodeId,
    pub ff_w2: NodeId,
    pub ff_b2: NodeId,
    pub ln2_gain: NodeId,
    pub ln2_bias: NodeId,
}

impl BlockParams {
    pub fn from_binding(binding: &Binding, prefix: &str, heads: usize) -> Self {
        BlockParams {
            heads: (0..heads)
                .map(|h| AttnHead {
                    wq: binding.id(&format!("{}.attn.h{}.wq", prefix, h)),
                    bq: binding.id(&format!("{}.attn.h{}.bq", prefix, h)),
                    wk: binding.id(&format!("{}.attn.h{}.wk", prefix, h)),
                    bk: binding.id(&format!("{}.attn.h{}.bk", prefix, h)),
                    wv: binding.id(&format!("{}.attn.h{}.wv", prefix, h)),
                    bv: binding.id(&format!("{}.attn.h{}.bv", prefix, h)),
                })
                .collect(),
            wo: binding.id(&format!("{}.attn.wo", prefix)),
            bo: binding.id(&format!("{}.attn.bo", prefix)),
            ln1_gain: binding.id(&format!("{}.ln1.gain", prefix)),
            ln1_bias: binding.id(&format!("{}.ln1.bias", prefix)),
            ff_w1: binding.id(&format!("{}.ff.w1", prefix)),
            ff_b1: binding.id(&format!("{}.ff.b1", prefix)),
            ff_w2: binding.id(&format!("{}.ff.w2", prefix)),
            ff_b2: binding.id(&format!("{}.ff.b2", prefix)),
            ln2_gain: binding.id(&format!("{}.ln2.gain", prefix)),
            ln2_bias: binding.id(&format!("{}.ln2.bias", prefix)),
        }
    }
}

/// Multi-head attention over `x` with scores scaled by 1/sqrt(d_head).
/// Masked positions receive zero attention weight as keys. Returns the
/// projected output and the attention node per head.
pub fn mha(g: &mut Graph, x: NodeId, block: &BlockParams, mask: &[bool]) -> (NodeId, Vec<NodeId>) {
    let mut outputs = Vec::with_capacity(block.heads.len());
    let mut attention = Vec::with_capacity(block.heads.len());
    for head in &block.heads {
        let d_head = g.value(head.wq).cols();
        let q = g.affine(x, head.wq, head.bq);
        let k = g.affine(x, head.wk, head.bk);
        let v = g.affine(x, head.wv, head.bv);
        let raw = g.matmul_nt(q, k);
        let scores = g.scale(raw, 1.0 / (d_head as f64).sqrt());
        let attn = g.softmax_rows(scores, mask);
        attention.push(attn);
        outputs.push(g.matmul(attn, v));
    }
    let combined = g.concat_cols(&outputs);
    (g.affine(combined, block.wo, block.bo), attention)
}

/// Post-norm transformer block: attention and feed-forward sublayers, each
/// wrapped in residual-then-LayerNorm, masked rows zeroed at the end.
pub fn transformer_block(
    g: &mut Graph,
    x: NodeId,
    block: &BlockParams,
    mask: &[bool],
    ctx: &mut ForwardCtx,
) -> (NodeId, Vec<NodeId>) {
    let (attn_out, attention) = mha(g, x, block, mask);
    let attn_out = g.dropout(attn_out, ctx.dropout, ctx.training, &mut ctx.rng);
    let summed = g.add(x, attn_out);
    let h = g.layer_norm(summed, block.ln1_gain, block.ln1_bias);
    let ff_in = g.affine(h, block.ff_w1, block.ff_b1);
    let ff_mid = g.relu(ff_in);
    let ff_out = g.affine(ff_mid, block.ff_w2, block.ff_b2);
    let ff_out = g.dropout(ff_out, ctx.dropout, ctx.training, &mut ctx.rng);
    let summed2 = g.add(h, ff_out);
    let normed = g.layer_norm(summed2, block.ln2_gain, block.ln2_bias);
    (g.mask_rows(normed, mask), attention)
}

/// Encode one tokenized sentence into a 1 x d_model_sent row: trim padding,
/// embed tokens plus positions, run the sentence blocks, take the
/// head-marker position.
pub fn encode_sentence(
    g: &mut Graph,
    binding: &Binding,
    sentence: &TokenizedSentence,
    cfg: &TextConfig,
    ctx: &mut ForwardCtx,
) -> NodeId {
    let len = sentence.real_len.max(1).min(sentence.ids.len());
    let ids = &sentence.ids[..len];
    let tok_embed = binding.id("text.tok_embed");
    let tokens = g.embedding_lookup(tok_embed, ids);
    let pos_table = binding.id("text.pos_sent");
    let positions: Vec<usize> = (0..len).collect();
    let pos = g.embedding_lookup(pos_table, &positions);
    let mut x = g.add(tokens, pos);
    let mask = vec![true; len];
    for l in 0..cfg.layers_sent {
        let block = BlockParams::from_binding(binding, &format!("text.sent.{}", l), cfg.heads_sent);
        let (next, _) = transformer_block(g, x, &block, &mask, ctx);
        x = next;
    }
    g.row(x, 0)
}

fn run_doc_stack(
    g: &mut Graph,
    binding: &Binding,
    rows: &[NodeId],
    prefix: &str,
    cfg: &TextConfig,
    ctx: &mut ForwardCtx,
) -> NodeId {
    let stacked = g.stack_rows(rows);
    let positions: Vec<usize> = (0..rows.len()).collect();
    let pos_table = binding.id("text.pos_doc");
    let pos = g.embedding_lookup(pos_table, &positions);
    let mut x = g.add(stacked, pos);
    let mask = vec![true; rows.len()];
    for l in 0..cfg.layers_doc {
        let block = BlockParams::from_binding(binding, &format!("{}.{}", prefix, l), cfg.heads_doc);
        let (next, _) = transformer_block(g, x, &block, &mask, ctx);
        x = next;
    }
    g.row(x, 0)
}

/// Combine per-sentence rows into a 1 x (2 * d_model_doc) document vector:
/// the forward stack reads the original order, the backward stack the
/// reversed order, and both position-zero outputs concatenate.
pub fn encode_document(
    g: &mut Graph,
    binding: &Binding,
    sentence_rows: &[NodeId],
    cfg: &TextConfig,
    ctx: &mut ForwardCtx,
) -> NodeId {
    assert!(!sentence_rows.is_empty(), "document encoder needs sentences");
    let fwd = run_doc_stack(g, binding, sentence_rows, "text.doc_fwd", cfg, ctx);
    let reversed: Vec<NodeId> = sentence_rows.iter().rev().copied().collect();
    let bwd = run_doc_stack(g, binding, &reversed, "text.doc_bwd", cfg, ctx);
    g.concat_cols(&[fwd, bwd])
}

/// Full text forward pass over a document's tokenized sentences.
pub fn forward(
    g: &mut Graph,
    binding: &Binding,
    tokens: &[TokenizedSentence],
    cfg: &TextConfig,
    ctx: &mut ForwardCtx,
) -> Result<NodeId, SubnetError> {
    if tokens.is_empty() {
        return Err(SubnetError::EmptySentences);
    }
    let used = &tokens[..tokens.len().min(cfg.max_sentences)];
    let rows: Vec<NodeId> = used
        .iter()
        .map(|s| encode_sentence(g, binding, s, cfg, ctx))
        .collect();
    Ok(encode_document(g, binding, &rows, cfg, ctx))
}
