//! Binary parameter checkpoints.
//!
//! Layout: the magic bytes `COQAN1`, a little-endian u32 manifest length,
//! a JSON manifest listing every tensor (name, shape, group, element
//! offset), then the concatenated payload as little-endian f32 in manifest
//! order. Parameters are written sorted by name, so saving a freshly
//! loaded checkpoint reproduces the file byte for byte.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{ParamGroup, ParameterStore, Tensor};

pub const MAGIC: &[u8; 6] = b"COQAN1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("not a checkpoint: bad magic")]
    BadMagic,
    #[error("checkpoint truncated: {0}")]
    Truncated(String),
    #[error("checkpoint entry {name}: {problem}")]
    BadEntry { name: String, problem: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: [usize; 2],
    group: String,
    offset: usize,
}

fn group_label(g: ParamGroup) -> &'static str {
    match g {
        ParamGroup::TextEncoder => "text_encoder",
        ParamGroup::Other => "other",
    }
}

/// Serialize every parameter of `store` to `path`.
pub fn save(store: &ParameterStore, path: &Path) -> Result<(), CheckpointError> {
    let mut manifest = Vec::with_capacity(store.len());
    let mut payload: Vec<u8> = Vec::with_capacity(store.total_values() * 4);
    let mut offset = 0usize;
    for (name, param) in store.iter() {
        let (rows, cols) = param.value.shape();
        manifest.push(ManifestEntry {
            name: name.to_string(),
            shape: [rows, cols],
            group: group_label(ParamGroup::of(name)).to_string(),
            offset,
        });
        for &v in param.value.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
        offset += param.value.len();
    }
    let manifest_json = serde_json::to_vec(&manifest)?;

    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(manifest_json.len() as u32).to_le_bytes())?;
    file.write_all(&manifest_json)?;
    file.write_all(&payload)?;
    Ok(())
}

/// Load a checkpoint into a fresh frozen store.
pub fn load(path: &Path) -> Result<ParameterStore, CheckpointError> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 6];
    file.read_exact(&mut magic)
        .map_err(|_| CheckpointError::Truncated("magic".into()))?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len_bytes = [0u8; 4];
    file.read_exact(&mut len_bytes)
        .map_err(|_| CheckpointError::Truncated("manifest length".into()))?;
    let manifest_len = u32::from_le_bytes(len_bytes) as usize;
    let mut manifest_json = vec![0u8; manifest_len];
    file.read_exact(&mut manifest_json)
        .map_err(|_| CheckpointError::Truncated("manifest".into()))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_slice(&manifest_json)?;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;

    let mut store = ParameterStore::frozen();
    for entry in &manifest {
        let [rows, cols] = entry.shape;
        let count = rows * cols;
        let start = entry.offset * 4;
        let end = start + count * 4;
        if end > payload.len() {
            return Err(CheckpointError::BadEntry {
                name: entry.name.clone(),
                problem: format!(
                    "payload has {} bytes, entry needs {}..{}",
                    payload.len(),
                    start,
                    end
                ),
            });
        }
        let expected = group_label(ParamGroup::of(&entry.name));
        if entry.group != expected {
            return Err(CheckpointError::BadEntry {
                name: entry.name.clone(),
                problem: format!("group {} but name implies {}", entry.group, expected),
            });
        }
        let data: Vec<f64> = payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        store.insert_raw(&entry.name, Tensor::from_vec(rows, cols, data));
    }
    Ok(store)
}
