//! Layout organization subnetwork.
//!
//! Two parallel branches read the same block-vector sequence: a
//! unidirectional GRU whose last hidden state summarizes reading order,
//! and a bank of one-dimensional convolutions (one weight matrix per
//! window size, ReLU, max-over-time pooling) that detects local block
//! patterns. The output is their concatenation, so its width is
//! `gru_hidden + kernel_count * filters_per_kernel` regardless of how many
//! blocks the article has. A sequence shorter than a conv window is
//! zero-padded at the tail to fill exactly one window.

use crate::article::MAX_BLOCKS;
use crate::config::LayoutConfig;
use crate::nn::{Binding, Graph, NodeId, ParameterStore, Tensor};

use super::SubnetError;

/// Declare GRU gate and convolution parameters for block vectors of width
/// `input_dim`.
pub fn init_params(store: &mut ParameterStore, cfg: &LayoutConfig, input_dim: usize) {
    let joint = input_dim + cfg.gru_hidden;
    for gate in ["z", "r", "c"] {
        store.weight(&format!("layout.gru.w_{}", gate), joint, cfg.gru_hidden);
        store.bias(&format!("layout.gru.b_{}", gate), cfg.gru_hidden);
    }
    for &size in &cfg.kernel_sizes {
        store.weight(
            &format!("layout.conv.k{}.w", size),
            size * input_dim,
            cfg.filters_per_kernel,
        );
        store.bias(&format!("layout.conv.k{}.b", size), cfg.filters_per_kernel);
    }
}

struct GruGate {
    w: NodeId,
    b: NodeId,
}

fn gate(binding: &Binding, name: &str) -> GruGate {
    GruGate {
        w: binding.id(&format!("layout.gru.w_{}", name)),
        b: binding.id(&format!("layout.gru.b_{}", name)),
    }
}

/// Build the layout forward pass; returns the node holding the
/// `1 x output_dim` subnetwork output.
pub fn forward(
    g: &mut Graph,
    binding: &Binding,
    vectors: &[Vec<f64>],
    cfg: &LayoutConfig,
) -> Result<NodeId, SubnetError> {
    if vectors.is_empty() {
        return Err(SubnetError::EmptyBlocks);
    }
    let vectors = &vectors[..vectors.len().min(MAX_BLOCKS)];

    let z = gate(binding, "z");
    let r = gate(binding, "r");
    let c = gate(binding, "c");
    let hidden = cfg.gru_hidden;
    let ones = g.leaf(Tensor::from_vec(1, hidden, vec![1.0; hidden]));
    let mut h = g.leaf(Tensor::zeros(1, hidden));
    for v in vectors {
        let x = g.leaf(Tensor::row_vector(v.clone()));
        let xh = g.concat_cols(&[x, h]);
        let z_lin = g.affine(xh, z.w, z.b);
        let z_t = g.sigmoid(z_lin);
        let r_lin = g.affine(xh, r.w, r.b);
        let r_t = g.sigmoid(r_lin);
        let gated_h = g.mul(r_t, h);
        let x_gh = g.concat_cols(&[x, gated_h]);
        let c_lin = g.affine(x_gh, c.w, c.b);
        let c_t = g.tanh(c_lin);
        let keep = g.sub(ones, z_t);
        let kept = g.mul(keep, h);
        let new = g.mul(z_t, c_t);
        h = g.add(kept, new);
    }

    let sequence = g.leaf(Tensor::from_rows(vectors));
    let mut pooled = Vec::with_capacity(cfg.kernel_sizes.len());
    for &size in &cfg.kernel_sizes {
        let w = binding.id(&format!("layout.conv.k{}.w", size));
        let b = binding.id(&format!("layout.conv.k{}.b", size));
        let windows = g.windows(sequence, size);
        let scores = g.affine(windows, w, b);
        let activated = g.relu(scores);
        pooled.push(g.max_over_rows(activated));
    }
    let conv = g.concat_cols(&pooled);
    Ok(g.concat_cols(&[h, conv]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{bind, gradcheck};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> LayoutConfig {
        LayoutConfig {
            gru_hidden: 5,
            kernel_sizes: vec![2, 3],
            filters_per_kernel: 4,
        }
    }

    fn random_vectors(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    fn built(seed: u64, cfg: &LayoutConfig, input_dim: usize) -> ParameterStore {
        let mut store = ParameterStore::new(seed);
        init_params(&mut store, cfg, input_dim);
        store
    }

    fn run(store: &ParameterStore, vectors: &[Vec<f64>], cfg: &LayoutConfig) -> Vec<f64> {
        let mut g = Graph::new();
        let binding = bind(store, &mut g);
        let out = forward(&mut g, &binding, vectors, cfg).unwrap();
        g.value(out).data().to_vec()
    }

    fn sigmoid(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    /// Plain-loop GRU cell: the update/reset/candidate recurrence computed
    /// directly on slices, independent of the graph ops.
    fn gru_cell_oracle(
        store: &ParameterStore,
        x: &[f64],
        h: &[f64],
        hidden: usize,
    ) -> Vec<f64> {
        let joint: Vec<f64> = x.iter().chain(h.iter()).copied().collect();
        let linear = |w: &Tensor, b: &Tensor, input: &[f64]| -> Vec<f64> {
            (0..hidden)
                .map(|j| {
                    let mut acc = b.data()[j];
                    for (i, &xi) in input.iter().enumerate() {
                        acc += xi * w.at(i, j);
                    }
                    acc
                })
                .collect()
        };
        let z: Vec<f64> = linear(store.value("layout.gru.w_z"), store.value("layout.gru.b_z"), &joint)
            .iter()
            .map(|&v| sigmoid(v))
            .collect();
        let r: Vec<f64> = linear(store.value("layout.gru.w_r"), store.value("layout.gru.b_r"), &joint)
            .iter()
            .map(|&v| sigmoid(v))
            .collect();
        let gated: Vec<f64> = x
            .iter()
            .copied()
            .chain(r.iter().zip(h).map(|(&ri, &hi)| ri * hi))
            .collect();
        let c: Vec<f64> = linear(store.value("layout.gru.w_c"), store.value("layout.gru.b_c"), &gated)
            .iter()
            .map(|&v| v.tanh())
            .collect();
        (0..hidden)
            .map(|j| (1.0 - z[j]) * h[j] + z[j] * c[j])
            .collect()
    }

    /// Per-filter conv response via explicit window loops.
    fn conv_oracle(store: &ParameterStore, vectors: &[Vec<f64>], cfg: &LayoutConfig) -> Vec<f64> {
        let dim = vectors[0].len();
        let mut out = Vec::new();
        for &size in &cfg.kernel_sizes {
            let w = store.value(&format!("layout.conv.k{}.w", size));
            let b = store.value(&format!("layout.conv.k{}.b", size));
            let window_count = vectors.len().saturating_sub(size - 1).max(1);
            for f in 0..cfg.filters_per_kernel {
                let mut best = f64::NEG_INFINITY;
                for start in 0..window_count {
                    let mut acc = b.data()[f];
                    for offset in 0..size {
                        if start + offset >= vectors.len() {
                            continue;
                        }
                        for d in 0..dim {
                            acc += vectors[start + offset][d] * w.at(offset * dim + d, f);
                        }
                    }
                    best = best.max(acc.max(0.0));
                }
                out.push(best);
            }
        }
        out
    }

    #[test]
    fn reference_config_output_dim_is_228() {
        let cfg = LayoutConfig {
            gru_hidden: 128,
            kernel_sizes: vec![2, 5, 10, 20],
            filters_per_kernel: 25,
        };
        let store = built(1, &cfg, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = run(&store, &random_vectors(&mut rng, 7, 13), &cfg);
        assert_eq!(out.len(), 228);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_block_list_is_an_error() {
        let cfg = small_cfg();
        let store = built(1, &cfg, 3);
        let mut g = Graph::new();
        let binding = bind(&store, &mut g);
        let err = forward(&mut g, &binding, &[], &cfg).unwrap_err();
        assert_eq!(err.to_string(), "article has no blocks");
    }

    #[test]
    fn gru_matches_composed_cell_oracle() {
        let cfg = small_cfg();
        let store = built(7, &cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vectors = random_vectors(&mut rng, 3, 3);

        let mut h = vec![0.0; cfg.gru_hidden];
        for v in &vectors {
            h = gru_cell_oracle(&store, v, &h, cfg.gru_hidden);
        }
        let out = run(&store, &vectors, &cfg);
        for (a, b) in out[..cfg.gru_hidden].iter().zip(&h) {
            assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn single_block_equals_one_cell_application() {
        let cfg = small_cfg();
        let store = built(9, &cfg, 3);
        let vectors = vec![vec![0.4, -0.2, 1.1]];
        let expected = gru_cell_oracle(&store, &vectors[0], &vec![0.0; cfg.gru_hidden], cfg.gru_hidden);
        let out = run(&store, &vectors, &cfg);
        for (a, b) in out[..cfg.gru_hidden].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_and_inputs_yield_zero_state() {
        let cfg = small_cfg();
        let mut store = built(3, &cfg, 3);
        for name in ["w_z", "w_r", "w_c"] {
            let shape = store.value(&format!("layout.gru.{}", name)).shape();
            store.set_value(&format!("layout.gru.{}", name), Tensor::zeros(shape.0, shape.1));
        }
        let out = run(&store, &vec![vec![0.0; 3]; 4], &cfg);
        assert!(out[..cfg.gru_hidden].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_matches_brute_force_oracle() {
        let cfg = small_cfg();
        let store = built(21, &cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for count in [1usize, 2, 5, 9] {
            let vectors = random_vectors(&mut rng, count, 3);
            let expected = conv_oracle(&store, &vectors, &cfg);
            let out = run(&store, &vectors, &cfg);
            let conv = &out[cfg.gru_hidden..];
            assert_eq!(conv.len(), expected.len());
            for (a, b) in conv.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10, "count {}: {} vs {}", count, a, b);
            }
        }
    }

    #[test]
    fn constant_bias_filter_is_append_invariant() {
        let cfg = LayoutConfig {
            gru_hidden: 2,
            kernel_sizes: vec![2],
            filters_per_kernel: 3,
        };
        let mut store = built(5, &cfg, 3);
        store.set_value("layout.conv.k2.w", Tensor::zeros(6, 3));
        store.set_value(
            "layout.conv.k2.b",
            Tensor::row_vector(vec![0.7, 0.2, 0.9]),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut vectors = random_vectors(&mut rng, 4, 3);
        let before = run(&store, &vectors, &cfg);
        vectors.push(vec![5.0, -3.0, 2.0]);
        let after = run(&store, &vectors, &cfg);
        assert_eq!(&before[cfg.gru_hidden..], &after[cfg.gru_hidden..]);
        assert_eq!(&before[cfg.gru_hidden..], &[0.7, 0.2, 0.9]);
    }

    #[test]
    fn block_order_transpositions_change_output() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for trial in 0..20 {
            let store = built(100 + trial, &cfg, 3);
            let mut vectors = random_vectors(&mut rng, 6, 3);
            let base = run(&store, &vectors, &cfg);
            let i = rng.gen_range(0..vectors.len());
            let mut j = rng.gen_range(0..vectors.len());
            while j == i {
                j = rng.gen_range(0..vectors.len());
            }
            vectors.swap(i, j);
            let swapped = run(&store, &vectors, &cfg);
            assert_ne!(base, swapped, "trial {} swap {}<->{}", trial, i, j);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = small_cfg();
        let store = built(41, &cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let vectors = random_vectors(&mut rng, 4, 3);
        let checked = ["layout.gru.w_z", "layout.gru.w_c", "layout.conv.k2.w", "layout.conv.k3.b"];
        let inputs: Vec<Tensor> = checked.iter().map(|n| store.value(n).clone()).collect();
        let report = gradcheck::check(&inputs, |ins| {
            let mut s = store.clone();
            for (name, t) in checked.iter().zip(ins) {
                s.set_value(name, t.clone());
            }
            let mut g = Graph::new();
            let binding = bind(&s, &mut g);
            let out = forward(&mut g, &binding, &vectors, &cfg).unwrap();
            let act = g.tanh(out);
            let loss = g.mean(act);
            (g, checked.iter().map(|n| binding.id(n)).collect(), loss)
        });
        assert!(report.max_rel_err < 1e-4, "rel err {}", report.max_rel_err);
    }
}
