//! Train several subnetwork subsets on the mixed corpus and compare test
//! accuracy. Each information channel (layout order, writing statistics,
//! token sequence) is noisy on its own, so adding subnetworks helps.
//!
//! Run with: cargo run --example ablation (takes a few minutes)

use coqan::config::{ModelConfig, SubnetSet, TrainConfig};
use coqan::model::ModelBundle;
use coqan::synthetic::{generate, CorpusKind};
use coqan::train::{evaluate, train};

fn main() {
    let seed = 3;
    let train_docs = generate(CorpusKind::Mixed, 400, seed);
    let val_docs = generate(CorpusKind::Mixed, 100, seed + 1);
    let test_docs = generate(CorpusKind::Mixed, 200, seed + 2);

    let cfg = ModelConfig::desk_small();
    let mut tcfg = TrainConfig::default();
    tcfg.max_epochs = 10;
    tcfg.lr_text = 1e-3;

    println!("{:<10} {:>9} {:>7}", "subnets", "test_acc", "epochs");
    for label in ["LO", "WC", "TS", "LO,WC", "LO,WC,TS"] {
        let subnets = SubnetSet::parse(label).unwrap();
        let mut bundle = ModelBundle::fit(&train_docs, &cfg, subnets, seed, 1).unwrap();
        let train_samples = bundle.prepare_all(&train_docs).unwrap();
        let val_samples = bundle.prepare_all(&val_docs).unwrap();
        let test_samples = bundle.prepare_all(&test_docs).unwrap();
        let outcome = train(
            bundle.store.clone(),
            &train_samples,
            &val_samples,
            &cfg,
            subnets,
            &tcfg,
            seed,
        )
        .unwrap();
        bundle.store = outcome.store;
        let (metrics, _) = evaluate(&bundle.store, &test_samples, &cfg, subnets).unwrap();
        println!(
            "{:<10} {:>9.4} {:>7}",
            label,
            metrics.accuracy,
            outcome.log.len()
        );
    }
}
