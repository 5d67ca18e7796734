//! Save a parameter store to the binary checkpoint format, load it back,
//! and confirm a second save reproduces the file byte for byte.
//!
//! Run with: cargo run --example checkpoint_roundtrip

use coqan::checkpoint;
use coqan::config::{ModelConfig, SubnetSet};
use coqan::model::new_store;

fn main() {
    let cfg = ModelConfig::desk_small();
    let store = new_store(&cfg, SubnetSet::FULL, 120, 7);
    let names: Vec<&str> = store.names().collect();
    println!("store holds {} parameter tensors", names.len());

    let dir = std::env::temp_dir().join("coqan-checkpoint-example");
    std::fs::create_dir_all(&dir).unwrap();
    let first = dir.join("model.ckpt");
    checkpoint::save(&store, &first).unwrap();
    let bytes_first = std::fs::read(&first).unwrap();
    println!("saved {} ({} bytes)", first.display(), bytes_first.len());

    let loaded = checkpoint::load(&first).unwrap();
    let second = dir.join("model-resaved.ckpt");
    checkpoint::save(&loaded, &second).unwrap();
    let bytes_second = std::fs::read(&second).unwrap();

    assert_eq!(bytes_first, bytes_second);
    println!("save -> load -> save reproduced the checkpoint byte for byte");
}
