//! Verify analytic gradients against central finite differences, from a
//! single primitive up through a full subnetwork forward pass.
//!
//! Run with: cargo run --example gradient_check

use coqan::config::LayoutConfig;
use coqan::nn::gradcheck;
use coqan::nn::{bind, Graph, ParameterStore, Tensor};
use coqan::subnet::layout;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    let a = random_tensor(&mut rng, 3, 4);
    let b = random_tensor(&mut rng, 4, 2);
    let report = gradcheck::check(&[a, b], |ins| {
        let mut g = Graph::new();
        let ia = g.leaf(ins[0].clone());
        let ib = g.leaf(ins[1].clone());
        let prod = g.matmul(ia, ib);
        let act = g.tanh(prod);
        let loss = g.mean(act);
        (g, vec![ia, ib], loss)
    });
    println!(
        "matmul+tanh+mean: max rel err {:.3e} over {} entries",
        report.max_rel_err, report.entries
    );

    let x = random_tensor(&mut rng, 4, 6);
    let report = gradcheck::check(&[x], |ins| {
        let mut g = Graph::new();
        let ix = g.leaf(ins[0].clone());
        let sm = g.softmax_rows(ix, &[true; 6]);
        let act = g.tanh(sm);
        let loss = g.mean(act);
        (g, vec![ix], loss)
    });
    println!(
        "softmax rows:     max rel err {:.3e} over {} entries",
        report.max_rel_err, report.entries
    );

    let cfg = LayoutConfig {
        gru_hidden: 6,
        kernel_sizes: vec![2, 3],
        filters_per_kernel: 4,
    };
    let input_dim = 5;
    let mut store = ParameterStore::new(23);
    layout::init_params(&mut store, &cfg, input_dim);
    let vectors: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let checked = ["layout.gru.w_z", "layout.conv.k2.w"];
    let inputs: Vec<Tensor> = checked.iter().map(|n| store.value(n).clone()).collect();
    let report = gradcheck::check(&inputs, |ins| {
        let mut s = store.clone();
        for (name, t) in checked.iter().zip(ins) {
            s.set_value(name, t.clone());
        }
        let mut g = Graph::new();
        let binding = bind(&s, &mut g);
        let out = layout::forward(&mut g, &binding, &vectors, &cfg).unwrap();
        let act = g.tanh(out);
        let loss = g.mean(act);
        (g, checked.iter().map(|n| binding.id(n)).collect(), loss)
    });
    println!(
        "layout forward:   max rel err {:.3e} over {} entries",
        report.max_rel_err, report.entries
    );
}
