use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    pareto_frontier, Scale, regate, run_pipeline, AblationVariant, BenchError, PipelineOptions, ParetoPoint, RunReport,
};
use crate::dataset::{add_noise, generate, subsample_train, Dataset};
use crate::systems::SystemId;

/// One dataset per system at `scale`, generated in parallel.
pub fn generate_datasets(systems: &[SystemId], data_seed: u64, scale: Scale) -> Result<Vec<Dataset>, BenchError> {
    let gen = scale.generate_options();
    systems.par_iter().map(|&s| Ok(generate(s, data_seed, &gen)?)).collect()
}

fn by_system(data: &[Dataset]) -> BTreeMap<SystemId, &Dataset> {
    data.iter().map(|d| (d.system, d)).collect()
}

fn systems_of(data: &[Dataset]) -> Vec<SystemId> {
    data.iter().map(|d| d.system).collect()
}

/// Main-table row: one (system, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub system: SystemId,
    pub seed: u64,
    pub dr: f64,
    pub fdr: f64,
    pub f1: f64,
    pub best_constancy: Option<f64>,
    pub accepted: usize,
    pub candidates: usize,
    pub best_restart_constancy: f64,
    pub val_mse: f64,
    pub mse_at_16: f64,
}

impl BenchmarkRow {
    pub fn of(r: &RunReport) -> Self {
        BenchmarkRow {
            system: r.system,
            seed: r.seed,
            dr: r.metrics.dr,
            fdr: r.metrics.fdr,
            f1: r.metrics.f1,
            best_constancy: r.metrics.best_constancy,
            accepted: r.accepted().count(),
            candidates: r.candidates.len(),
            best_restart_constancy: r.restart_constancies[r.best_restart],
            val_mse: r.metrics.val_mse,
            mse_at_16: r.metrics.mse_at_16,
        }
    }
}

/// Every (dataset, seed) cell of the main benchmark.
pub fn run_benchmark(
    data: &[Dataset],
    seeds: &[u64],
    opts: &PipelineOptions,
) -> Result<(Vec<BenchmarkRow>, Vec<RunReport>), BenchError> {
    let systems = &systems_of(data);
    let data = by_system(data);
    let cells: Vec<(SystemId, u64)> = systems.iter().flat_map(|&s| seeds.iter().map(move |&k| (s, k))).collect();
    let reports = cells
        .par_iter()
        .map(|&(s, seed)| run_pipeline(data[&s], seed, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((reports.iter().map(BenchmarkRow::of).collect(), reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub system: SystemId,
    pub variant: AblationVariant,
    pub dr: f64,
    pub fdr: f64,
    pub f1: f64,
    pub accepted: usize,
    pub best_constancy: Option<f64>,
}

impl AblationRow {
    fn of(r: &RunReport) -> Self {
        AblationRow {
            system: r.system,
            variant: r.variant,
            dr: r.metrics.dr,
            fdr: r.metrics.fdr,
            f1: r.metrics.f1,
            accepted: r.accepted().count(),
            best_constancy: r.metrics.best_constancy,
        }
    }

    /// Table cell in the form `F1 (DR/FDR)`.
    pub fn cell(&self) -> String {
        format!("{:.2} ({:.1}/{:.1})", self.f1, self.dr, self.fdr)
    }
}

/// One run per (system, variant). `no_diversity` changes only the gate, so it
/// re-decides the full run's candidates instead of retraining.
pub fn run_ablation(
    data: &[Dataset],
    variants: &[AblationVariant],
    seed: u64,
    opts: &PipelineOptions,
) -> Result<(Vec<AblationRow>, Vec<RunReport>), BenchError> {
    let systems = &systems_of(data);
    let data = by_system(data);
    let trained: Vec<AblationVariant> = {
        let mut v: Vec<AblationVariant> =
            variants.iter().map(|&v| if v == AblationVariant::NoDiversity { AblationVariant::Full } else { v }).collect();
        v.sort_by_key(|v| v.name());
        v.dedup();
        v
    };
    let cells: Vec<(SystemId, AblationVariant)> =
        systems.iter().flat_map(|&s| trained.iter().map(move |&v| (s, v))).collect();
    let runs: BTreeMap<(SystemId, &'static str), RunReport> = cells
        .par_iter()
        .map(|&(s, v)| {
            let o = opts.clone().with_variant(v);
            Ok(((s, v.name()), run_pipeline(data[&s], seed, &o)?))
        })
        .collect::<Result<_, BenchError>>()?;
    let mut reports = Vec::new();
    for &s in systems {
        for &v in variants {
            let report = if v == AblationVariant::NoDiversity {
                let o = opts.clone().with_variant(v);
                let mut r = regate(&runs[&(s, AblationVariant::Full.name())], &o.gate_for(s));
                r.variant = v;
                r
            } else {
                runs[&(s, v.name())].clone()
            };
            reports.push(report);
        }
    }
    Ok((reports.iter().map(AblationRow::of).collect(), reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub system: SystemId,
    pub sigma: f64,
    pub seed: u64,
    pub dr: f64,
    pub fdr: f64,
    pub f1: f64,
    pub accepted: usize,
    pub best_constancy: Option<f64>,
}

/// Perturbs each dataset with state noise of every σ and reruns the pipeline.
pub fn run_noise_suite(
    data: &[Dataset],
    sigmas: &[f64],
    seeds: &[u64],
    opts: &PipelineOptions,
) -> Result<(Vec<NoiseRow>, Vec<RunReport>), BenchError> {
    let systems = &systems_of(data);
    let data = by_system(data);
    let mut cells = Vec::new();
    for &s in systems {
        for &sigma in sigmas {
            for &seed in seeds {
                cells.push((s, sigma, seed));
            }
        }
    }
    let reports = cells
        .par_iter()
        .map(|&(s, sigma, seed)| {
            let noisy = add_noise(data[&s], sigma, seed)?;
            run_pipeline(&noisy, seed, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = reports
        .iter()
        .map(|r| NoiseRow {
            system: r.system,
            sigma: r.noise_sigma,
            seed: r.seed,
            dr: r.metrics.dr,
            fdr: r.metrics.fdr,
            f1: r.metrics.f1,
            accepted: r.accepted().count(),
            best_constancy: r.metrics.best_constancy,
        })
        .collect();
    Ok((rows, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub system: SystemId,
    pub n_train: usize,
    pub dr: f64,
    pub fdr: f64,
    pub f1: f64,
    pub best_restart_constancy: f64,
    pub best_constancy: Option<f64>,
}

/// Trains on the first `n` shuffled training trajectories for each size,
/// keeping validation and test splits fixed.
pub fn run_sample_efficiency(
    data: &[Dataset],
    sizes: &[usize],
    seed: u64,
    opts: &PipelineOptions,
) -> Result<(Vec<SampleRow>, Vec<RunReport>), BenchError> {
    let systems = &systems_of(data);
    let data = by_system(data);
    let cells: Vec<(SystemId, usize)> = systems.iter().flat_map(|&s| sizes.iter().map(move |&n| (s, n))).collect();
    let reports = cells
        .par_iter()
        .map(|&(s, n)| run_pipeline(&subsample_train(data[&s], n)?, seed, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = reports
        .iter()
        .map(|r| SampleRow {
            system: r.system,
            n_train: r.n_train,
            dr: r.metrics.dr,
            fdr: r.metrics.fdr,
            f1: r.metrics.f1,
            best_restart_constancy: r.restart_constancies[r.best_restart],
            best_constancy: r.metrics.best_constancy,
        })
        .collect();
    Ok((rows, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    Restarts(Vec<usize>),
    RhoMin(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Restarts(_) => "restarts",
            SweepAxis::RhoMin(_) => "rho_min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub system: SystemId,
    pub axis: String,
    pub value: f64,
    pub dr: f64,
    pub fdr: f64,
    pub f1: f64,
    pub accepted: usize,
}

/// Hyperparameter sweep. Restart counts retrain; diversity thresholds
/// re-decide one full run per system.
pub fn run_sweep(
    data: &[Dataset],
    axis: &SweepAxis,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<(Vec<SweepRow>, Vec<RunReport>), BenchError> {
    let systems = &systems_of(data);
    let data = by_system(data);
    let row = |r: &RunReport, value: f64| SweepRow {
        system: r.system,
        axis: axis.name().to_string(),
        value,
        dr: r.metrics.dr,
        fdr: r.metrics.fdr,
        f1: r.metrics.f1,
        accepted: r.accepted().count(),
    };
    match axis {
        SweepAxis::Restarts(counts) => {
            let cells: Vec<(SystemId, usize)> =
                systems.iter().flat_map(|&s| counts.iter().map(move |&r| (s, r))).collect();
            let reports = cells
                .par_iter()
                .map(|&(s, r)| run_pipeline(data[&s], seed, &PipelineOptions { restarts: r, ..opts.clone() }))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = reports.iter().map(|r| row(r, r.restarts as f64)).collect();
            Ok((rows, reports))
        }
        SweepAxis::RhoMin(thresholds) => {
            let base = systems
                .par_iter()
                .map(|&s| run_pipeline(data[&s], seed, opts))
                .collect::<Result<Vec<_>, _>>()?;
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for r in &base {
                for &t in thresholds {
                    let mut gate = opts.gate_for(r.system);
                    gate.rho_min = t;
                    let g = regate(r, &gate);
                    rows.push(row(&g, t));
                    reports.push(g);
                }
            }
            Ok((rows, reports))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub system: SystemId,
    pub seed: u64,
    pub points: Vec<ParetoPoint>,
    pub frontier: Vec<ParetoPoint>,
}

/// Test constancy against complexity for every scored candidate of one run.
pub fn run_pareto(report: &RunReport) -> ParetoReport {
    let points: Vec<ParetoPoint> = report
        .candidates
        .iter()
        .filter(|c| c.gate.constancy.is_finite())
        .map(|c| ParetoPoint { label: format!("{}: {}", c.id, c.infix), constancy: c.gate.constancy, complexity: c.complexity })
        .collect();
    let frontier = pareto_frontier(&points);
    ParetoReport { system: report.system, seed: report.seed, points, frontier }
}
