use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{BenchError, RunReport, StageTimings};
use crate::systems::SystemId;

/// Per-run wall-clock timings live here, apart from the byte-stable reports.
pub const TIMINGS_FILE: &str = "timings.json";

/// Pretty JSON with a trailing newline; parent directories are created.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::Output(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// One CSV row per element, header from the field names.
pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::Output(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Output(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TimingRecord {
    system: SystemId,
    seed: u64,
    variant: &'static str,
    noise_sigma: f64,
    n_train: usize,
    seconds: StageTimings,
}

pub fn write_timings(dir: &Path, reports: &[RunReport]) -> Result<(), BenchError> {
    let records: Vec<TimingRecord> = reports
        .iter()
        .map(|r| TimingRecord {
            system: r.system,
            seed: r.seed,
            variant: r.variant.name(),
            noise_sigma: r.noise_sigma,
            n_train: r.n_train,
            seconds: r.timings,
        })
        .collect();
    write_json(&dir.join(TIMINGS_FILE), &records)
}
