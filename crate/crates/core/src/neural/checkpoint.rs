//! Model checkpoints: `<dir>/<name>.json` manifest plus `<name>.f64` holding the
//! flat parameter vector as little-endian f64, guarded by SHA-256.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Mlp, NeuralError, Standardizer};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub sizes: Vec<usize>,
    pub scaler: Standardizer,
    pub params_file: String,
    pub n_params: usize,
    pub sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(dir: &Path, name: &str, net: &Mlp, scaler: &Standardizer) -> Result<Checkpoint, NeuralError> {
    fs::create_dir_all(dir)?;
    let bytes: Vec<u8> = net.params().iter().flat_map(|p| p.to_le_bytes()).collect();
    let params_file = format!("{name}.f64");
    fs::write(dir.join(&params_file), &bytes)?;
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        sizes: net.sizes().to_vec(),
        scaler: scaler.clone(),
        params_file,
        n_params: net.params().len(),
        sha256: hex(&bytes),
    };
    let text = serde_json::to_string_pretty(&ck).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    fs::write(dir.join(format!("{name}.json")), text + "\n")?;
    Ok(ck)
}

pub fn load_checkpoint(dir: &Path, name: &str) -> Result<(Mlp, Standardizer), NeuralError> {
    let text = fs::read_to_string(dir.join(format!("{name}.json")))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!(
            "format version {} (expected {CHECKPOINT_VERSION})",
            ck.format_version
        )));
    }
    let bytes = fs::read(dir.join(&ck.params_file))?;
    if bytes.len() != ck.n_params * 8 {
        return Err(NeuralError::Checkpoint(format!(
            "parameter blob truncated: {} bytes, expected {}",
            bytes.len(),
            ck.n_params * 8
        )));
    }
    if hex(&bytes) != ck.sha256 {
        return Err(NeuralError::Checkpoint("parameter blob checksum mismatch".into()));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((Mlp::from_params(&ck.sizes, params)?, ck.scaler))
}
