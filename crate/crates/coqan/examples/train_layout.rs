//! Train a layout-only model on the layout-signal corpus and watch it
//! separate well-interleaved pages from clumped ones.
//!
//! Run with: cargo run --example train_layout

use coqan::config::{ModelConfig, SubnetSet, TrainConfig};
use coqan::model::ModelBundle;
use coqan::synthetic::{generate, CorpusKind};
use coqan::train::{evaluate, train};

fn main() {
    let seed = 7;
    let train_docs = generate(CorpusKind::LayoutSignal, 200, seed);
    let val_docs = generate(CorpusKind::LayoutSignal, 60, seed + 1);

    let cfg = ModelConfig::desk_small();
    let subnets = SubnetSet::parse("LO").unwrap();
    let mut tcfg = TrainConfig::default();
    tcfg.max_epochs = 12;

    let mut bundle = ModelBundle::fit(&train_docs, &cfg, subnets, seed, 1).unwrap();
    let train_samples = bundle.prepare_all(&train_docs).unwrap();
    let val_samples = bundle.prepare_all(&val_docs).unwrap();

    println!("epoch  train_loss  val_loss  val_acc");
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
    for rec in &outcome.log {
        println!(
            "{:>5}  {:>10.4}  {:>8.4}  {:>7.4}",
            rec.epoch, rec.train_loss, rec.val_loss, rec.val_acc
        );
    }
    bundle.store = outcome.store;

    let (metrics, loss) = evaluate(&bundle.store, &val_samples, &cfg, subnets).unwrap();
    println!();
    println!(
        "validation: accuracy {:.4}, f1 {:.4}, loss {:.4} (best epoch {})",
        metrics.accuracy, metrics.f1, loss, outcome.best_epoch
    );
}
