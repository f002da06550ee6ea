//! Benchmark datasets: generation, PDE moment reduction, splits, noise,
//! subsampling, and the on-disk format.

mod storage;

pub use storage::{load, save, DatasetManifest, FORMAT_VERSION};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{self, EtdCoefficients, IntegrateError, OdeSolveConfig, SpectralGrid};
use crate::rng::{self, label, Gaussian};
use crate::systems::{self, InitialState, ParamSet, SystemId, SystemSpec, BURGERS_VISCOSITY};
use crate::verify;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("trajectory {traj_id} failed to integrate: {source}")]
    Integration {
        traj_id: usize,
        #[source]
        source: IntegrateError,
    },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch in blob `{0}`")]
    Checksum(String),
    #[error("blob `{name}` is truncated: expected {expected} bytes, found {found}")]
    Truncated { name: String, expected: usize, found: usize },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One trajectory: `steps × dim` states in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub traj_id: usize,
    pub params: ParamSet,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn state(&self, t: usize, dim: usize) -> &[f64] {
        &self.states[t * dim..(t + 1) * dim]
    }

    pub fn rows(&self, dim: usize) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(dim)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Splits {
    /// Fisher–Yates shuffle of `0..n`, then 70/15/15 slices.
    pub fn shuffled(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut idx, &mut rng::stream(seed, &[label::SPLIT]));
        let n_train = n * 70 / 100;
        let n_val = n * 15 / 100;
        Splits {
            train: idx[..n_train].to_vec(),
            val: idx[n_train..n_train + n_val].to_vec(),
            test: idx[n_train + n_val..].to_vec(),
        }
    }

    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: SystemId,
    pub dim: usize,
    pub steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    pub splits: Splits,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl Dataset {
    pub fn spec(&self) -> SystemSpec {
        self.system.spec()
    }

    pub fn n_traj(&self) -> usize {
        self.trajectories.len()
    }

    pub fn split(&self, split: Split) -> Vec<&Trajectory> {
        self.splits.get(split).iter().map(|&i| &self.trajectories[i]).collect()
    }
}

/// Overrides of the full-scale trajectory count and length.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GenerateOptions {
    pub n_traj: Option<usize>,
    pub steps: Option<usize>,
}

impl GenerateOptions {
    pub fn desk() -> Self {
        GenerateOptions {
            n_traj: Some(100),
            steps: Some(200),
        }
    }
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Simulates every trajectory of `system` and splits them. Stored values are
/// rounded to single precision so the on-disk form is lossless.
pub fn generate(system: SystemId, seed: u64, opts: &GenerateOptions) -> Result<Dataset, DatasetError> {
    let spec = system.spec();
    let n_traj = opts.n_traj.unwrap_or(spec.n_traj);
    let steps = opts.steps.unwrap_or(spec.steps);
    if n_traj < 3 || steps < 2 {
        return Err(DatasetError::Invalid(format!("need ≥ 3 trajectories and ≥ 2 steps, got {n_traj}×{steps}")));
    }
    let times: Vec<f64> = (0..steps).map(|t| round_f32(t as f64 * spec.dt)).collect();
    let pde = match system {
        SystemId::Burgers => Some((SpectralGrid::burgers(), None)),
        SystemId::Ks => {
            let grid = SpectralGrid::ks();
            let coeffs = EtdCoefficients::new(&grid, spec.dt);
            Some((grid, Some(coeffs)))
        }
        _ => None,
    };

    let trajectories = (0..n_traj)
        .into_par_iter()
        .map(|traj_id| {
            let params = systems::sample_params(system, &mut rng::stream(seed, &[label::PARAMS, traj_id as u64]));
            let ic = systems::sample_initial_condition(system, &mut rng::stream(seed, &[label::INITIAL, traj_id as u64]));
            let states = match (ic, &pde) {
                (InitialState::State(x0), None) => {
                    let cfg = OdeSolveConfig::new((0.0, (steps - 1) as f64 * spec.dt), steps);
                    let p = params.values.clone();
                    integrate::solve_ode(|_, x, out| systems::rhs(system, &p, x, out), &x0, &cfg)
                        .map(|sol| sol.states)
                }
                (InitialState::Field(u0), Some((grid, coeffs))) => {
                    simulate_field(u0, steps, spec.dt, grid, coeffs.as_ref()).map(|h| reduce_moments(&h).interleaved())
                }
                _ => unreachable!("initial state kind matches system kind"),
            }
            .map_err(|source| DatasetError::Integration { traj_id, source })?;
            Ok(Trajectory {
                traj_id,
                params,
                states: states.into_iter().map(round_f32).collect(),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;

    Ok(Dataset {
        system,
        dim: spec.dim,
        steps,
        dt: spec.dt,
        times,
        trajectories,
        splits: Splits::shuffled(n_traj, seed),
        seed,
        noise_sigma: 0.0,
    })
}

fn simulate_field(
    u0: Vec<f64>,
    steps: usize,
    dt: f64,
    grid: &SpectralGrid,
    ks: Option<&EtdCoefficients>,
) -> Result<Vec<Vec<f64>>, IntegrateError> {
    let mut history = Vec::with_capacity(steps);
    history.push(u0);
    for _ in 1..steps {
        let u = history.last().expect("non-empty");
        let next = match ks {
            Some(coeffs) => integrate::step_ks(u, coeffs, grid)?,
            None => integrate::step_burgers(u, dt, BURGERS_VISCOSITY, grid)?,
        };
        history.push(next);
    }
    Ok(history)
}

/// Spatial mean, variance and skewness of a field history.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub skewness: Vec<f64>,
}

impl MomentSeries {
    /// Rows of (mean, variance, skewness), flattened.
    pub fn interleaved(&self) -> Vec<f64> {
        (0..self.mean.len())
            .flat_map(|t| [self.mean[t], self.variance[t], self.skewness[t]])
            .collect()
    }
}

/// Population moments per time step; skewness is 0 where the variance is 0.
pub fn reduce_moments<F: AsRef<[f64]>>(history: &[F]) -> MomentSeries {
    let mut out = MomentSeries {
        mean: Vec::with_capacity(history.len()),
        variance: Vec::with_capacity(history.len()),
        skewness: Vec::with_capacity(history.len()),
    };
    for field in history {
        let u = field.as_ref();
        let n = u.len() as f64;
        let mean = u.iter().sum::<f64>() / n;
        let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let third = u.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let skew = if var > 0.0 { third / var.powf(1.5) } else { 0.0 };
        out.mean.push(mean);
        out.variance.push(var);
        out.skewness.push(skew);
    }
    out
}

/// Adds i.i.d. `N(0, σ²)` to every stored state entry.
pub fn add_noise(ds: &Dataset, sigma: f64, seed: u64) -> Result<Dataset, DatasetError> {
    if !(sigma >= 0.0) {
        return Err(DatasetError::Invalid(format!("noise sigma must be ≥ 0, got {sigma}")));
    }
    let mut out = ds.clone();
    out.noise_sigma = sigma;
    if sigma == 0.0 {
        return Ok(out);
    }
    out.trajectories.par_iter_mut().for_each(|traj| {
        let mut rng = rng::stream(seed, &[label::NOISE, traj.traj_id as u64]);
        let mut g = Gaussian::new();
        for v in traj.states.iter_mut() {
            *v = round_f32(*v + sigma * g.sample(&mut rng));
        }
    });
    Ok(out)
}

/// Keeps the first `n` (already shuffled) training indices.
pub fn subsample_train(ds: &Dataset, n: usize) -> Result<Dataset, DatasetError> {
    if n == 0 || n > ds.splits.train.len() {
        return Err(DatasetError::Invalid(format!(
            "training subsample size must be in 1..={}, got {n}",
            ds.splits.train.len()
        )));
    }
    let mut out = ds.clone();
    out.splits.train.truncate(n);
    Ok(out)
}

/// Test-split constancy of the closed-form invariant, for true-law systems.
pub fn audit_true_law(ds: &Dataset, split: Split) -> Option<f64> {
    if !ds.system.has_true_law() {
        return None;
    }
    let series: Vec<Vec<f64>> = ds
        .split(split)
        .iter()
        .map(|tr| {
            tr.rows(ds.dim)
                .map(|x| systems::true_invariant(ds.system, x, &tr.params).unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    verify::constancy(&series, verify::EPS).ok()
}
