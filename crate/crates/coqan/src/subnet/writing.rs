//! Writing characteristics subnetwork.
//!
//! The 48-value feature record embeds into one row per field: numerical
//! fields scale a learned vector by their value, the categorical field
//! looks up an embedding table. Stacked interacting layers then run
//! multi-head self-attention over the field rows. Attention similarity is
//! the raw inner product of the projected rows, deliberately without a
//! 1/sqrt(d) factor, and each layer ends in a ReLU over the head
//! concatenation plus a learned residual projection of its input. The
//! subnetwork output concatenates all field rows of the last layer.
//!
//! The forward pass hands back the attention node per layer and head so
//! exports read the exact weights the prediction used.

use crate::config::WritingConfig;
use crate::features::{FeatureRecord, FEATURE_COUNT};
use crate::nn::{Binding, Graph, NodeId, ParameterStore, Tensor};

use super::SubnetError;

pub fn init_params(store: &mut ParameterStore, cfg: &WritingConfig) {
    store.weight("wc.embed.num", FEATURE_COUNT - 1, cfg.embed_dim);
    store.weight("wc.embed.cat", cfg.category_count, cfg.embed_dim);
    for layer in 0..cfg.layers {
        let d_in = if layer == 0 {
            cfg.embed_dim
        } else {
            cfg.layer_output_dim()
        };
        for head in 0..cfg.heads {
            for proj in ["wq", "wk", "wv"] {
                store.weight(
                    &format!("wc.layer{}.head{}.{}", layer, head, proj),
                    d_in,
                    cfg.head_dim,
                );
            }
        }
        store.weight(
            &format!("wc.layer{}.w_res", layer),
            d_in,
            cfg.layer_output_dim(),
        );
    }
}

/// Node ids for one interacting layer's projections.
pub struct InteractingLayer {
    pub heads: Vec<HeadProjections>,
    pub w_res: NodeId,
}

pub struct HeadProjections {
    pub wq: NodeId,
    pub wk: NodeId,
    pub wv: NodeId,
}

impl InteractingLayer {
    pub fn from_binding(binding: &Binding, layer: usize, heads: usize) -> Self {
        InteractingLayer {
            heads: (0..heads)
                .map(|h| HeadProjections {
                    wq: binding.id(&format!("wc.layer{}.head{}.wq", layer, h)),
                    wk: binding.id(&format!("wc.layer{}.head{}.wk", layer, h)),
                    wv: binding.id(&format!("wc.layer{}.head{}.wv", layer, h)),
                })
                .collect(),
            w_res: binding.id(&format!("wc.layer{}.w_res", layer)),
        }
    }
}

/// One interacting layer over `x` (n x d_in). Returns the layer output
/// (n x heads*head_dim) and the attention node per head (each n x n).
pub fn interacting_layer(
    g: &mut Graph,
    x: NodeId,
    layer: &InteractingLayer,
) -> (NodeId, Vec<NodeId>) {
    let n = g.value(x).rows();
    let mask = vec![true; n];
    let mut head_outputs = Vec::with_capacity(layer.heads.len());
    let mut attention = Vec::with_capacity(layer.heads.len());
    for head in &layer.heads {
        let q = g.matmul(x, head.wq);
        let k = g.matmul(x, head.wk);
        let v = g.matmul(x, head.wv);
        let scores = g.matmul_nt(q, k);
        let attn = g.softmax_rows(scores, &mask);
        attention.push(attn);
        head_outputs.push(g.matmul(attn, v));
    }
    let combined = g.concat_cols(&head_outputs);
    let residual = g.matmul(x, layer.w_res);
    let summed = g.add(combined, residual);
    (g.relu(summed), attention)
}

#[derive(Debug)]
pub struct WritingForward {
    /// 1 x (48 * heads * head_dim)
    pub output: NodeId,
    /// attention[layer][head] is the n x n attention node of that head.
    pub attention: Vec<Vec<NodeId>>,
}

/// Embed the feature record and run the stacked interacting layers.
pub fn forward(
    g: &mut Graph,
    binding: &Binding,
    record: &FeatureRecord,
    cfg: &WritingConfig,
) -> Result<WritingForward, SubnetError> {
    let category = record.get(FEATURE_COUNT);
    let id = category as usize;
    if category < 0.0 || category.fract() != 0.0 || id >= cfg.category_count {
        return Err(SubnetError::CategoryRange {
            id: category.max(0.0) as usize,
            table: cfg.category_count,
        });
    }

    let numeric = FEATURE_COUNT - 1;
    let mut value_rows = Vec::with_capacity(numeric * cfg.embed_dim);
    for i in 1..=numeric {
        value_rows.extend(std::iter::repeat(record.get(i)).take(cfg.embed_dim));
    }
    let values = g.leaf(Tensor::from_vec(numeric, cfg.embed_dim, value_rows));
    let num_embed = binding.id("wc.embed.num");
    let numeric_rows = g.mul(values, num_embed);
    let cat_embed = binding.id("wc.embed.cat");
    let cat_row = g.embedding_lookup(cat_embed, &[id]);
    let mut x = g.stack_rows(&[numeric_rows, cat_row]);

    let mut attention = Vec::with_capacity(cfg.layers);
    for layer in 0..cfg.layers {
        let params = InteractingLayer::from_binding(binding, layer, cfg.heads);
        let (next, attn) = interacting_layer(g, x, &params);
        x = next;
        attention.push(attn);
    }

    let rows: Vec<NodeId> = (0..FEATURE_COUNT).map(|i| g.row(x, i)).collect();
    Ok(WritingForward {
        output: g.concat_cols(&rows),
        attention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{bind, gradcheck};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> WritingConfig {
        WritingConfig {
            embed_dim: 6,
            heads: 2,
            head_dim: 4,
            layers: 2,
            category_count: 5,
        }
    }

    fn record_with(values: impl Fn(usize) -> f64, category: f64) -> FeatureRecord {
        let mut v = [0.0; FEATURE_COUNT];
        for (i, slot) in v.iter_mut().enumerate().take(FEATURE_COUNT - 1) {
            *slot = values(i + 1);
        }
        v[FEATURE_COUNT - 1] = category;
        FeatureRecord::from_values(v)
    }

    fn built(seed: u64, cfg: &WritingConfig) -> ParameterStore {
        let mut store = ParameterStore::new(seed);
        init_params(&mut store, cfg);
        store
    }

    fn run(store: &ParameterStore, record: &FeatureRecord, cfg: &WritingConfig) -> (Vec<f64>, Graph, WritingForward) {
        let mut g = Graph::new();
        let binding = bind(store, &mut g);
        let fwd = forward(&mut g, &binding, record, cfg).unwrap();
        let out = g.value(fwd.output).data().to_vec();
        (out, g, fwd)
    }

    #[test]
    fn embedding_linearity_in_numeric_values() {
        let cfg = small_cfg();
        let store = built(1, &cfg);
        let zero = record_with(|_| 0.0, 0.0);
        let one = record_with(|i| if i == 5 { 1.0 } else { 0.0 }, 0.0);
        let two = record_with(|i| if i == 5 { 2.0 } else { 0.0 }, 0.0);

        let embed = |r: &FeatureRecord| -> Vec<Vec<f64>> {
            let mut g = Graph::new();
            let binding = bind(&store, &mut g);
            let num = binding.id("wc.embed.num");
            let mut values = Vec::new();
            for i in 1..FEATURE_COUNT {
                values.extend(std::iter::repeat(r.get(i)).take(cfg.embed_dim));
            }
            let v = g.leaf(Tensor::from_vec(FEATURE_COUNT - 1, cfg.embed_dim, values));
            let rows = g.mul(v, num);
            (0..FEATURE_COUNT - 1)
                .map(|i| g.value(rows).row(i).to_vec())
                .collect()
        };

        let e0 = embed(&zero);
        assert!(e0.iter().flatten().all(|&v| v == 0.0));
        let e1 = embed(&one);
        let e2 = embed(&two);
        for (a, b) in e1[4].iter().zip(&e2[4]) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn category_row_comes_from_the_table() {
        let cfg = small_cfg();
        let store = built(2, &cfg);
        let table = store.value("wc.embed.cat").clone();
        for cat in [1usize, 3] {
            let mut g = Graph::new();
            let binding = bind(&store, &mut g);
            let record = record_with(|_| 0.0, cat as f64);
            let _ = record;
            let node = g.embedding_lookup(binding.id("wc.embed.cat"), &[cat]);
            assert_eq!(g.value(node).row(0), table.row(cat));
        }
    }

    #[test]
    fn out_of_range_category_is_an_error() {
        let cfg = small_cfg();
        let store = built(3, &cfg);
        let mut g = Graph::new();
        let binding = bind(&store, &mut g);
        let record = record_with(|_| 0.1, 9.0);
        let err = forward(&mut g, &binding, &record, &cfg).unwrap_err();
        assert!(matches!(err, SubnetError::CategoryRange { id: 9, table: 5 }));
    }

    #[test]
    fn attention_rows_sum_to_one_everywhere() {
        let cfg = small_cfg();
        let store = built(4, &cfg);
        let record = record_with(|i| (i as f64 * 0.37).sin(), 2.0);
        let (_, g, fwd) = run(&store, &record, &cfg);
        assert_eq!(fwd.attention.len(), cfg.layers);
        for layer in &fwd.attention {
            assert_eq!(layer.len(), cfg.heads);
            for &attn in layer {
                let t = g.value(attn);
                assert_eq!(t.shape(), (FEATURE_COUNT, FEATURE_COUNT));
                for i in 0..t.rows() {
                    let sum: f64 = t.row(i).iter().sum();
                    assert!((sum - 1.0).abs() < 1e-6, "row {} sums to {}", i, sum);
                }
            }
        }
    }

    #[test]
    fn zero_projections_reduce_to_residual_relu() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(3, 2, vec![0.5, -1.0, 2.0, 0.3, -0.7, 1.2]));
        let zero = g.leaf(Tensor::zeros(2, 4));
        let w_res = g.leaf(Tensor::from_vec(
            2,
            4,
            vec![1.0, -2.0, 0.5, 0.0, 0.25, 1.5, -1.0, 3.0],
        ));
        let layer = InteractingLayer {
            heads: vec![HeadProjections {
                wq: zero,
                wk: zero,
                wv: zero,
            }],
            w_res,
        };
        let (out, _) = interacting_layer(&mut g, x, &layer);

        let mut g2 = Graph::new();
        let x2 = g2.leaf(Tensor::from_vec(3, 2, vec![0.5, -1.0, 2.0, 0.3, -0.7, 1.2]));
        let w2 = g2.leaf(Tensor::from_vec(
            2,
            4,
            vec![1.0, -2.0, 0.5, 0.0, 0.25, 1.5, -1.0, 3.0],
        ));
        let prod = g2.matmul(x2, w2);
        let expect = g2.relu(prod);
        assert_eq!(g.value(out).data(), g2.value(expect).data());
    }

    /// Direct evaluation of the layer equations with explicit loops:
    /// similarity by inner product of projected rows, softmax over fields,
    /// weighted sum of value projections, ReLU over concat plus residual.
    fn layer_oracle(
        x: &Tensor,
        heads: &[(Tensor, Tensor, Tensor)],
        w_res: &Tensor,
    ) -> Vec<Vec<f64>> {
        let n = x.rows();
        let d_in = x.cols();
        let head_dim = heads[0].0.cols();
        let project = |w: &Tensor, row: &[f64]| -> Vec<f64> {
            (0..head_dim)
                .map(|j| (0..d_in).map(|i| row[i] * w.at(i, j)).sum())
                .collect()
        };
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
        for (wq, wk, wv) in heads {
            let q: Vec<Vec<f64>> = (0..n).map(|i| project(wq, x.row(i))).collect();
            let k: Vec<Vec<f64>> = (0..n).map(|i| project(wk, x.row(i))).collect();
            let v: Vec<Vec<f64>> = (0..n).map(|i| project(wv, x.row(i))).collect();
            for p in 0..n {
                let scores: Vec<f64> = (0..n)
                    .map(|q_idx| q[p].iter().zip(&k[q_idx]).map(|(a, b)| a * b).sum())
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                let mut combined = vec![0.0; head_dim];
                for (j, &e) in exps.iter().enumerate() {
                    let a = e / total;
                    for d in 0..head_dim {
                        combined[d] += a * v[j][d];
                    }
                }
                rows[p].extend(combined);
            }
        }
        for (p, row) in rows.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let res: f64 = (0..d_in).map(|i| x.at(p, i) * w_res.at(i, j)).sum();
                *slot = (*slot + res).max(0.0);
            }
        }
        rows
    }

    #[test]
    fn three_field_layer_matches_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut rand_tensor = |r: usize, c: usize| {
            Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
        };
        let x = rand_tensor(3, 4);
        let heads: Vec<(Tensor, Tensor, Tensor)> = (0..2)
            .map(|_| (rand_tensor(4, 2), rand_tensor(4, 2), rand_tensor(4, 2)))
            .collect();
        let w_res = rand_tensor(4, 4);

        let expected = layer_oracle(&x, &heads, &w_res);

        let mut g = Graph::new();
        let xn = g.leaf(x);
        let layer = InteractingLayer {
            heads: heads
                .iter()
                .map(|(q, k, v)| HeadProjections {
                    wq: g.leaf(q.clone()),
                    wk: g.leaf(k.clone()),
                    wv: g.leaf(v.clone()),
                })
                .collect(),
            w_res: g.leaf(w_res),
        };
        let (out, attn) = interacting_layer(&mut g, xn, &layer);
        assert_eq!(attn.len(), 2);
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                let got = g.value(out).at(i, j);
                assert!((got - want).abs() < 1e-10, "({},{}): {} vs {}", i, j, got, want);
            }
        }
    }

    #[test]
    fn reference_config_dims() {
        let cfg = WritingConfig {
            embed_dim: 128,
            heads: 4,
            head_dim: 64,
            layers: 3,
            category_count: 32,
        };
        let store = built(5, &cfg);
        let record = record_with(|i| (i as f64).cos(), 7.0);
        let (out, g, fwd) = run(&store, &record, &cfg);
        assert_eq!(out.len(), 12288);
        assert_eq!(fwd.attention.len(), 3);
        for layer in &fwd.attention {
            assert_eq!(layer.len(), 4);
            for &a in layer {
                assert_eq!(g.value(a).shape(), (48, 48));
            }
        }
    }

    #[test]
    fn zeroed_table_and_zero_record_give_zero_output() {
        let cfg = small_cfg();
        let mut store = built(6, &cfg);
        store.set_value(
            "wc.embed.cat",
            Tensor::zeros(cfg.category_count, cfg.embed_dim),
        );
        let record = record_with(|_| 0.0, 3.0);
        let (out, _, _) = run(&store, &record, &cfg);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn swapping_layer_parameters_changes_output() {
        let cfg = WritingConfig {
            embed_dim: 6,
            heads: 2,
            head_dim: 3,
            layers: 3,
            category_count: 4,
        };
        let store = built(7, &cfg);
        let record = record_with(|i| (i as f64 * 0.1).sin(), 1.0);
        let (base, _, _) = run(&store, &record, &cfg);

        let mut swapped = store.clone();
        for head in 0..cfg.heads {
            for proj in ["wq", "wk", "wv"] {
                let a_name = format!("wc.layer1.head{}.{}", head, proj);
                let b_name = format!("wc.layer2.head{}.{}", head, proj);
                let a = swapped.value(&a_name).clone();
                let b = swapped.value(&b_name).clone();
                swapped.set_value(&a_name, b);
                swapped.set_value(&b_name, a);
            }
        }
        let a = swapped.value("wc.layer1.w_res").clone();
        let b = swapped.value("wc.layer2.w_res").clone();
        swapped.set_value("wc.layer1.w_res", b);
        swapped.set_value("wc.layer2.w_res", a);

        let (permuted, _, _) = run(&swapped, &record, &cfg);
        assert_ne!(base, permuted);
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let mut rand_tensor = |r: usize, c: usize| {
            Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-0.5..0.5)).collect())
        };
        let inputs = vec![
            rand_tensor(3, 4),
            rand_tensor(4, 2),
            rand_tensor(4, 2),
            rand_tensor(4, 2),
            rand_tensor(4, 2),
        ];
        let report = gradcheck::check(&inputs, |ins| {
            let mut g = Graph::new();
            let x = g.leaf(ins[0].clone());
            let layer = InteractingLayer {
                heads: vec![HeadProjections {
                    wq: g.leaf(ins[1].clone()),
                    wk: g.leaf(ins[2].clone()),
                    wv: g.leaf(ins[3].clone()),
                }],
                w_res: g.leaf(ins[4].clone()),
            };
            let (out, _) = interacting_layer(&mut g, x, &layer);
            let t = g.tanh(out);
            let loss = g.mean(t);
            let ids = vec![x, layer.heads[0].wq, layer.heads[0].wk, layer.heads[0].wv, layer.w_res];
            (g, ids, loss)
        });
        assert!(report.max_rel_err < 1e-4, "rel err {}", report.max_rel_err);
    }
}
