use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::{ParameterStore, RngState, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    /// Number of `f64` values; must equal the shape product.
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    tensors: Vec<TensorEntry>,
    config: serde_json::Value,
    rng: RngState,
}

/// Parameters plus the configuration and generator state that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParameterStore,
    pub config: serde_json::Value,
    pub rng: RngState,
}

/// Writes `path/manifest.json` and `path/weights.bin`, creating `path`.
/// Tensors are stored in name order as little-endian `f64`.
pub fn save_checkpoint(
    store: &ParameterStore,
    config: &impl Serialize,
    rng: &RngState,
    path: &Path,
) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let mut payload = Vec::with_capacity(store.entry_count() * 8);
    let mut tensors = Vec::with_capacity(store.len());
    for (name, t) in store.iter() {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: [t.rows(), t.cols()],
            len: t.len(),
        });
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        tensors,
        config: serde_json::to_value(config).map_err(|e| Error::Checkpoint(e.to_string()))?,
        rng: *rng,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mp = path.join(MANIFEST_FILE);
    fs::write(&mp, text).map_err(|e| Error::io(&mp, e))?;
    let pp = path.join(PAYLOAD_FILE);
    fs::write(&pp, payload).map_err(|e| Error::io(&pp, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mp = path.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("corrupted manifest: {e}")))?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {CHECKPOINT_VERSION})",
            manifest.format_version
        )));
    }
    for t in &manifest.tensors {
        if t.shape[0] * t.shape[1] != t.len {
            return Err(Error::Checkpoint(format!(
                "tensor `{}`: shape {}x{} does not hold {} values",
                t.name, t.shape[0], t.shape[1], t.len
            )));
        }
    }
    let pp = path.join(PAYLOAD_FILE);
    let payload = fs::read(&pp).map_err(|e| Error::io(&pp, e))?;
    let expected: usize = manifest.tensors.iter().map(|t| t.len * 8).sum();
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, manifest requires {expected}",
            payload.len()
        )));
    }
    let mut params = ParameterStore::new();
    let mut chunks = payload.chunks_exact(8);
    for t in manifest.tensors {
        if params.contains(&t.name) {
            return Err(Error::Checkpoint(format!("tensor `{}` listed twice", t.name)));
        }
        let data = chunks
            .by_ref()
            .take(t.len)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        params.insert(t.name, Tensor::from_vec(t.shape[0], t.shape[1], data)?);
    }
    Ok(Checkpoint {
        params,
        config: manifest.config,
        rng: manifest.rng,
    })
}
