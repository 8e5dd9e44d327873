//! Model checkpoint file: a versioned JSON dump of (config, input_dim,
//! parameters, center) with a layout checksum.
//!
//! Format (version 1):
//!
//! ```json
//! {
//!   "version": 1,
//!   "config": { "kind": "dae", ... },
//!   "input_dim": 6,
//!   "layout": "dae enc[6,3,2] dec[2,3,6]",
//!   "layout_checksum": "9e1b...",
//!   "params": [0.1, ...],
//!   "center": null
//! }
//! ```
//!
//! Parameters are finite f64 values; JSON serialization round-trips them
//! bit-exactly. The checksum covers the layout descriptor so a checkpoint
//! cannot be loaded into a model with a different parameter layout.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numeric::ParamVector;

use super::{build_model, ModelConfig, ModelError, ModelState};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    input_dim: usize,
    layout: String,
    layout_checksum: String,
    params: Vec<f64>,
    center: Option<Vec<f64>>,
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn layout_checksum(descriptor: &str, param_len: usize) -> String {
    format!(
        "{:016x}",
        fnv1a64(format!("{descriptor}#{param_len}").as_bytes())
    )
}

/// Write a checkpoint; the optimizer state is deliberately not persisted.
pub fn save_model(path: &Path, state: &ModelState) -> Result<(), ModelError> {
    let descriptor = state.layout_descriptor();
    let file = CheckpointFile {
        version: FORMAT_VERSION,
        config: state.config().clone(),
        input_dim: state.input_dim(),
        layout_checksum: layout_checksum(&descriptor, state.params().len()),
        layout: descriptor,
        params: state.params().values().to_vec(),
        center: state.center().map(|c| c.to_vec()),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| ModelError::Checkpoint(format!("serialize: {e}")))?;
    fs::write(path, json).map_err(|e| ModelError::Checkpoint(format!("write {path:?}: {e}")))
}

/// Load a checkpoint, rebuilding the architecture from its config and
/// validating the layout checksum and parameter finiteness.
pub fn load_model(path: &Path) -> Result<ModelState, ModelError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ModelError::Checkpoint(format!("read {path:?}: {e}")))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| ModelError::Checkpoint(format!("parse {path:?}: {e}")))?;
    if file.version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version {}",
            file.version
        )));
    }
    let mut state = build_model(&file.config, file.input_dim, 0)?;
    let expected = layout_checksum(&state.layout_descriptor(), state.params().len());
    if expected != file.layout_checksum {
        return Err(ModelError::Checkpoint(format!(
            "layout checksum mismatch: file has {} ({}), model expects {}",
            file.layout_checksum, file.layout, expected
        )));
    }
    if file.params.len() != state.params().len() {
        return Err(ModelError::Checkpoint(format!(
            "parameter count mismatch: file has {}, model expects {}",
            file.params.len(),
            state.params().len()
        )));
    }
    if file.params.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::Checkpoint("non-finite parameter".into()));
    }
    state.set_params(ParamVector::new(file.params))?;
    if let Some(center) = file.center {
        state.set_center(center);
    }
    Ok(state)
}
