//! Train briefly, then score unseen articles: probability, hard label,
//! and whether the label matched the ground truth.
//!
//! Run with: cargo run --example predict

use coqan::config::{ModelConfig, SubnetSet, TrainConfig};
use coqan::model::ModelBundle;
use coqan::synthetic::{generate, CorpusKind};
use coqan::train::train;

fn main() {
    let seed = 7;
    let train_docs = generate(CorpusKind::LayoutSignal, 200, seed);
    let val_docs = generate(CorpusKind::LayoutSignal, 40, seed + 1);
    let fresh_docs = generate(CorpusKind::LayoutSignal, 10, seed + 2);

    let cfg = ModelConfig::desk_small();
    let subnets = SubnetSet::parse("LO").unwrap();
    let mut tcfg = TrainConfig::default();
    tcfg.max_epochs = 12;

    let mut bundle = ModelBundle::fit(&train_docs, &cfg, subnets, seed, 1).unwrap();
    let train_samples = bundle.prepare_all(&train_docs).unwrap();
    let val_samples = bundle.prepare_all(&val_docs).unwrap();
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

    println!("{:<22} {:>11} {:>6} {:>6} {:>6}", "id", "probability", "pred", "true", "hit");
    let mut hits = 0;
    for doc in &fresh_docs {
        let sample = bundle.prepare(doc).unwrap();
        let prediction = bundle.predict(&sample).unwrap();
        let truth = doc.label.unwrap();
        let hit = prediction.label == truth;
        hits += usize::from(hit);
        println!(
            "{:<22} {:>11.4} {:>6} {:>6} {:>6}",
            doc.id,
            prediction.probability,
            prediction.label,
            truth,
            if hit { "yes" } else { "NO" }
        );
    }
    println!();
    println!("{}/{} unseen articles classified correctly", hits, fresh_docs.len());
}
