//! Dataset directory layout:
//!
//! ```text
//! <dir>/manifest.json     metadata, split indices, per-trajectory parameters, blob table
//! <dir>/trajectories.f32  n_traj × steps × dim, little-endian f32, row-major
//! <dir>/times.f32         steps, little-endian f32
//! ```
//!
//! Every blob is listed in the manifest with its shape and SHA-256 digest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, DatasetError, Splits, Trajectory};
use crate::systems::{ParamSet, SystemId, SystemKind};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub file: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub system: SystemId,
    pub kind: SystemKind,
    pub dim: usize,
    pub n_traj: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    pub has_true_law: bool,
    pub constants: Vec<(String, f64)>,
    pub param_names: Vec<String>,
    /// One row per trajectory, ordered by `traj_id`.
    pub params: Vec<Vec<f64>>,
    pub splits: Splits,
    pub blobs: Vec<BlobEntry>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(DatasetError::VersionMismatch {
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(manifest)
    }
}

fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn encode_f32(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

fn write_blob(dir: &Path, name: &str, shape: Vec<usize>, bytes: &[u8]) -> Result<BlobEntry, DatasetError> {
    let file = format!("{name}.f32");
    fs::write(dir.join(&file), bytes)?;
    Ok(BlobEntry {
        name: name.to_string(),
        file,
        dtype: "f32le".to_string(),
        shape,
        sha256: digest_hex(bytes),
    })
}

fn read_blob(dir: &Path, entry: &BlobEntry) -> Result<Vec<f64>, DatasetError> {
    let bytes = fs::read(dir.join(&entry.file))?;
    let expected = entry.shape.iter().product::<usize>() * 4;
    if bytes.len() != expected {
        return Err(DatasetError::Truncated {
            name: entry.name.clone(),
            expected,
            found: bytes.len(),
        });
    }
    if digest_hex(&bytes) != entry.sha256 {
        return Err(DatasetError::Checksum(entry.name.clone()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Writes `ds` under `dir`, creating the directory if needed.
pub fn save(ds: &Dataset, dir: &Path) -> Result<DatasetManifest, DatasetError> {
    fs::create_dir_all(dir)?;
    let spec = ds.spec();
    let traj_bytes = encode_f32(ds.trajectories.iter().flat_map(|t| t.states.iter().copied()));
    let time_bytes = encode_f32(ds.times.iter().copied());
    let blobs = vec![
        write_blob(dir, "trajectories", vec![ds.n_traj(), ds.steps, ds.dim], &traj_bytes)?,
        write_blob(dir, "times", vec![ds.steps], &time_bytes)?,
    ];
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        system: ds.system,
        kind: spec.kind,
        dim: ds.dim,
        n_traj: ds.n_traj(),
        steps: ds.steps,
        dt: ds.dt,
        seed: ds.seed,
        noise_sigma: ds.noise_sigma,
        has_true_law: spec.has_true_law,
        constants: spec.constants().into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        param_names: ds.trajectories.first().map(|t| t.params.names.clone()).unwrap_or_default(),
        params: ds.trajectories.iter().map(|t| t.params.values.clone()).collect(),
        splits: ds.splits.clone(),
        blobs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    fs::write(dir.join(MANIFEST), text + "\n")?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<Dataset, DatasetError> {
    let m = DatasetManifest::read(dir)?;
    let blob = |name: &str| {
        m.blobs
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| DatasetError::Manifest(format!("missing blob `{name}`")))
    };
    let traj_entry = blob("trajectories")?;
    if traj_entry.shape != [m.n_traj, m.steps, m.dim] {
        return Err(DatasetError::Manifest("trajectory blob shape disagrees with header".into()));
    }
    let states = read_blob(dir, traj_entry)?;
    let times = read_blob(dir, blob("times")?)?;
    if m.params.len() != m.n_traj {
        return Err(DatasetError::Manifest("parameter table length disagrees with n_traj".into()));
    }
    let per = m.steps * m.dim;
    let trajectories = m
        .params
        .iter()
        .enumerate()
        .map(|(i, values)| {
            Ok(Trajectory {
                traj_id: i,
                params: ParamSet::new(m.system, values.clone())
                    .map_err(|e| DatasetError::Manifest(e.to_string()))?,
                states: states[i * per..(i + 1) * per].to_vec(),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok(Dataset {
        system: m.system,
        dim: m.dim,
        steps: m.steps,
        dt: m.dt,
        times,
        trajectories,
        splits: m.splits,
        seed: m.seed,
        noise_sigma: m.noise_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{add_noise, generate, GenerateOptions};

    fn small() -> Dataset {
        generate(SystemId::CoupledSprings, 8, &GenerateOptions { n_traj: Some(12), steps: Some(30) }).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = add_noise(&small(), 0.05, 2).unwrap();
        let manifest = save(&ds, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), ds);
        assert_eq!(manifest.steps, 30);
        assert_eq!(manifest.dt, SystemId::CoupledSprings.spec().dt);
    }

    #[test]
    fn saving_twice_gives_identical_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save(&small(), a.path()).unwrap();
        save(&small(), b.path()).unwrap();
        for f in ["manifest.json", "trajectories.f32", "times.f32"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        save(&small(), dir.path()).unwrap();
        let path = dir.path().join("trajectories.f32");
        let mut bytes = fs::read(&path).unwrap();
        bytes[17] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load(dir.path()), Err(DatasetError::Checksum(name)) if name == "trajectories"));
        bytes.truncate(100);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load(dir.path()), Err(DatasetError::Truncated { .. })));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save(&small(), dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&path, text).unwrap();
        assert!(matches!(load(dir.path()), Err(DatasetError::VersionMismatch { found: 7, .. })));
    }
}
