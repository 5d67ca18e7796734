//! Export the feature-interaction attention maps of one article: one
//! head-averaged matrix per interacting layer plus every per-head matrix,
//! written as CSV files next to an index.
//!
//! Run with: cargo run --example attention_export

use coqan::config::{ModelConfig, SubnetSet};
use coqan::experiments::{collect_attention, write_attention};
use coqan::model::ModelBundle;
use coqan::synthetic::{generate, CorpusKind};

fn main() {
    let seed = 5;
    let docs = generate(CorpusKind::FeatureSignal, 20, seed);
    let cfg = ModelConfig::desk_small();
    let bundle = ModelBundle::fit(&docs, &cfg, SubnetSet::FULL, seed, 1).unwrap();

    let export = collect_attention(&bundle, &docs[0]).unwrap();
    println!(
        "article {}: {} layers x {} heads, {}x{} matrices",
        export.article_id,
        export.mean_matrices.len(),
        export.head_matrices[0].len(),
        export.mean_matrices[0].rows(),
        export.mean_matrices[0].cols()
    );

    for (l, mean) in export.mean_matrices.iter().enumerate() {
        let row0: f64 = mean.row(0).iter().sum();
        let strongest = mean
            .row(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        println!(
            "layer {}: feature 1 attends most to feature {} ({:.4}); row sum {:.6}",
            l + 1,
            strongest.0 + 1,
            strongest.1,
            row0
        );
    }

    let dir = std::env::temp_dir().join("coqan-attention-example");
    let index = write_attention(&export, &dir, seed, "example00cafe").unwrap();
    println!("\nwrote CSVs and index to {}", index.display());
}
