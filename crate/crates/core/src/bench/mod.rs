//! End-to-end pipeline driver and the experiment suites built on it.
//!
//! A run trains the dynamics model, trains the invariant network with
//! restarts, extracts symbolic candidates, gates them on the test split and
//! adjudicates the survivors. Reports are deterministic in `(dataset, seed,
//! options)`; wall-clock timings are kept out of the serialized report and
//! written to their own file.

mod output;
mod suites;

pub use output::{write_csv, write_json, write_timings, TIMINGS_FILE};
pub use suites::{
    generate_datasets, run_ablation, run_benchmark, run_noise_suite, run_pareto, run_sample_efficiency, run_sweep, AblationRow,
    BenchmarkRow, NoiseRow, ParetoReport, SampleRow, SweepAxis, SweepRow,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{generate, Dataset, DatasetError, GenerateOptions, Split};
use crate::extract::{
    explicit_pde_candidates, gp::GpConfig, gp_symreg, lv_lasso_candidate, poly_lasso_candidate, sample_phi_pairs,
    Candidate, ExtractError, Source, DEFAULT_PHI_SAMPLES,
};
use crate::neural::{train_dynamics, train_phi_restarts, DynamicsConfig, NeuralError, PhiConfig};
use crate::systems::{SystemId, SystemKind};
use crate::verify::{adjudicate, evaluate_series, gate_decision, gate_series, GateConfig, GateRecord, Verdict};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Seed of the generated datasets; pipeline seeds vary independently.
pub const DEFAULT_DATA_SEED: u64 = 42;
/// Node-count cap for candidates on PDE systems.
pub const PDE_MAX_COMPLEXITY: usize = 6;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("dynamics: {0}")]
    Dynamics(#[source] NeuralError),
    #[error("phi: {0}")]
    Phi(#[source] NeuralError),
    #[error("extract: {0}")]
    Extract(#[from] ExtractError),
    #[error("invalid option: {0}")]
    Invalid(String),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn generate_options(self) -> GenerateOptions {
        match self {
            Scale::Desk => GenerateOptions::desk(),
            Scale::Paper => GenerateOptions::default(),
        }
    }

    pub fn restarts(self) -> usize {
        match self {
            Scale::Desk => 3,
            Scale::Paper => 10,
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(BenchError::Invalid(format!("unknown scale `{other}` (desk | paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoRestarts,
    NoDiversity,
    NoLvLasso,
    NoPolyLasso,
    LassoOff,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 6] = [
        AblationVariant::Full,
        AblationVariant::NoRestarts,
        AblationVariant::NoDiversity,
        AblationVariant::NoLvLasso,
        AblationVariant::NoPolyLasso,
        AblationVariant::LassoOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoRestarts => "no_restarts",
            AblationVariant::NoDiversity => "no_diversity",
            AblationVariant::NoLvLasso => "no_lv_lasso",
            AblationVariant::NoPolyLasso => "no_poly_lasso",
            AblationVariant::LassoOff => "lasso_off",
        }
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| BenchError::Invalid(format!("unknown ablation variant `{s}`")))
    }
}

/// Everything that determines a run besides the dataset and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub scale: Scale,
    pub variant: AblationVariant,
    pub restarts: usize,
    pub dynamics: DynamicsConfig,
    pub phi: PhiConfig,
    pub gp: GpConfig,
    pub gate: GateConfig,
    pub phi_samples: usize,
    pub poly_lasso: bool,
    pub lv_lasso: bool,
    pub pde_max_complexity: Option<usize>,
}

impl PipelineOptions {
    pub fn new(scale: Scale) -> Self {
        let (dynamics, phi) = match scale {
            Scale::Desk => (DynamicsConfig::desk(), PhiConfig::desk()),
            Scale::Paper => (DynamicsConfig::paper(), PhiConfig::paper()),
        };
        PipelineOptions {
            scale,
            variant: AblationVariant::Full,
            restarts: scale.restarts(),
            dynamics,
            phi,
            gp: GpConfig::default(),
            gate: GateConfig::default(),
            phi_samples: DEFAULT_PHI_SAMPLES,
            poly_lasso: true,
            lv_lasso: true,
            pde_max_complexity: Some(PDE_MAX_COMPLEXITY),
        }
    }

    /// Applies an ablation on top of the current settings.
    pub fn with_variant(mut self, variant: AblationVariant) -> Self {
        self.variant = variant;
        match variant {
            AblationVariant::Full => {}
            AblationVariant::NoRestarts => self.restarts = 1,
            AblationVariant::NoDiversity => self.gate.rho_min = 0.0,
            AblationVariant::NoLvLasso => self.lv_lasso = false,
            AblationVariant::NoPolyLasso => self.poly_lasso = false,
            AblationVariant::LassoOff => {
                self.poly_lasso = false;
                self.lv_lasso = false;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.restarts == 0 {
            return Err(BenchError::Invalid("restarts must be ≥ 1".into()));
        }
        if !(self.gate.tau > 0.0) {
            return Err(BenchError::Invalid(format!("tau must be > 0, got {}", self.gate.tau)));
        }
        if !(self.gate.rho_min >= 0.0) {
            return Err(BenchError::Invalid(format!("rho_min must be ≥ 0, got {}", self.gate.rho_min)));
        }
        Ok(())
    }

    /// The gate as applied on `system`, with the PDE cap where it applies.
    pub fn gate_for(&self, system: SystemId) -> GateConfig {
        let mut gate = self.gate;
        if system.kind() == SystemKind::Pde {
            gate.max_complexity = self.pde_max_complexity;
        }
        gate
    }
}

/// Wall-clock seconds per stage, from a monotonic clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub dynamics: f64,
    pub phi: f64,
    pub extract: f64,
    pub gate: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub source: Source,
    pub expression: String,
    pub infix: String,
    pub complexity: usize,
    pub gate: GateRecord,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dr: f64,
    pub fdr: f64,
    pub f1: f64,
    /// Lowest test constancy among accepted candidates.
    pub best_constancy: Option<f64>,
    pub val_mse: f64,
    pub mse_at_16: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub system: SystemId,
    pub seed: u64,
    pub data_seed: u64,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub variant: AblationVariant,
    pub restarts: usize,
    pub restart_constancies: Vec<f64>,
    pub best_restart: usize,
    pub candidates: Vec<CandidateRecord>,
    /// Extractors that could not produce a candidate on this dataset.
    pub extraction_failures: Vec<String>,
    pub metrics: Metrics,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl RunReport {
    pub fn accepted(&self) -> impl Iterator<Item = &CandidateRecord> {
        self.candidates.iter().filter(|c| c.gate.accepted)
    }
}

/// `2PR/(P+R)` with `P = 1 − FDR`, `R = DR`; zero when both vanish.
pub fn f1_score(dr: f64, fdr: f64) -> f64 {
    let (p, r) = (1.0 - fdr, dr);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Discovery and false-discovery rates of one run.
///
/// On a system with a law, DR is 1 when some accepted candidate is the law.
/// On a system without one, every acceptance is a false claim of a law, so
/// DR and FDR are both 1 when anything is accepted and both 0 otherwise.
pub fn discovery_rates(system: SystemId, accepted: &[Verdict]) -> (f64, f64) {
    if accepted.is_empty() {
        return (0.0, 0.0);
    }
    let spurious = accepted.iter().filter(|&&v| v == Verdict::Spurious).count();
    let fdr = spurious as f64 / accepted.len() as f64;
    let dr = if system.has_true_law() {
        if spurious < accepted.len() { 1.0 } else { 0.0 }
    } else {
        1.0
    };
    (dr, fdr)
}

/// Generates the dataset for `system` at the options' scale and runs the pipeline.
pub fn run_system(system: SystemId, data_seed: u64, seed: u64, opts: &PipelineOptions) -> Result<RunReport, BenchError> {
    let ds = generate(system, data_seed, &opts.scale.generate_options())?;
    run_pipeline(&ds, seed, opts)
}

fn secs(since: Instant) -> f64 {
    since.elapsed().as_secs_f64()
}

/// Runs every stage on `ds`.
pub fn run_pipeline(ds: &Dataset, seed: u64, opts: &PipelineOptions) -> Result<RunReport, BenchError> {
    opts.validate()?;
    let system = ds.system;
    let start = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let (_, dyn_metrics) = train_dynamics(ds, &opts.dynamics, seed).map_err(BenchError::Dynamics)?;
    timings.dynamics = secs(t);

    let t = Instant::now();
    let phi = train_phi_restarts(ds, opts.restarts, &opts.phi, seed).map_err(BenchError::Phi)?;
    timings.phi = secs(t);

    let t = Instant::now();
    let train = ds.split(Split::Train);
    let mut candidates: Vec<(String, Candidate, usize)> = Vec::new();
    let mut failures = Vec::new();
    let mut keep = |id: &str, result: Result<Candidate, ExtractError>, candidates: &mut Vec<_>| match result {
        Ok(c) => {
            let k = c.expression.complexity();
            candidates.push((id.to_string(), c, k));
        }
        Err(e) => failures.push(format!("{id}: {e}")),
    };
    if opts.poly_lasso {
        keep("poly_lasso", poly_lasso_candidate(&train, ds.dim), &mut candidates);
    }
    if opts.lv_lasso && system == SystemId::LotkaVolterra {
        keep("lv_lasso", lv_lasso_candidate(&train, ds.dim), &mut candidates);
    }
    if system.kind() == SystemKind::Pde {
        for (i, c) in explicit_pde_candidates(system)?.into_iter().enumerate() {
            keep(&format!("explicit_{i}"), Ok(c), &mut candidates);
        }
    }
    let n_samples = opts.phi_samples.min(train.len() * ds.steps);
    let gp = sample_phi_pairs(phi.best_model(), ds, n_samples, seed)
        .and_then(|samples| gp_symreg(&samples, &opts.gp, seed));
    match gp {
        Ok(result) => {
            for entry in result.pareto {
                // The complexity includes the folded rescaling constants.
                let c = Candidate { source: Source::Gp, expression: entry.expression, fit: None };
                candidates.push((format!("gp_c{}", entry.complexity), c, entry.complexity));
            }
        }
        Err(e) => failures.push(format!("gp: {e}")),
    }
    timings.extract = secs(t);

    let t = Instant::now();
    let test = ds.split(Split::Test);
    let gate = opts.gate_for(system);
    let records: Vec<CandidateRecord> = candidates
        .par_iter()
        .map(|(id, c, complexity)| {
            let series = evaluate_series(&c.expression, &test, ds.dim);
            let record = gate_series(&series, *complexity, &gate);
            CandidateRecord {
                id: id.clone(),
                source: c.source,
                expression: c.expression.to_string(),
                infix: c.expression.to_infix(),
                complexity: *complexity,
                gate: record,
                verdict: adjudicate(system, &series, &test, ds.dim),
            }
        })
        .collect();
    timings.gate = secs(t);

    let accepted: Vec<Verdict> = records.iter().filter(|r| r.gate.accepted).map(|r| r.verdict).collect();
    let (dr, fdr) = discovery_rates(system, &accepted);
    let best_constancy = records
        .iter()
        .filter(|r| r.gate.accepted)
        .map(|r| r.gate.constancy)
        .min_by(f64::total_cmp);
    timings.total = secs(start);

    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        system,
        seed,
        data_seed: ds.seed,
        noise_sigma: ds.noise_sigma,
        n_train: train.len(),
        variant: opts.variant,
        restarts: opts.restarts,
        restart_constancies: phi.constancies(),
        best_restart: phi.best,
        candidates: records,
        extraction_failures: failures,
        metrics: Metrics {
            dr,
            fdr,
            f1: f1_score(dr, fdr),
            best_constancy,
            val_mse: dyn_metrics.val_mse,
            mse_at_16: dyn_metrics.mse_at_16,
        },
        timings,
    })
}

/// Re-decides acceptance of a finished run under another gate, reusing the
/// recorded constancy and ρ of every candidate.
pub fn regate(report: &RunReport, gate: &GateConfig) -> RunReport {
    let mut out = report.clone();
    for c in &mut out.candidates {
        let g = &mut c.gate;
        g.reason = gate_decision(g.constancy, g.rho, g.invalid_fraction, c.complexity, gate);
        g.accepted = g.reason.is_none();
    }
    let accepted: Vec<Verdict> = out.accepted().map(|c| c.verdict).collect();
    let (dr, fdr) = discovery_rates(out.system, &accepted);
    out.metrics.dr = dr;
    out.metrics.fdr = fdr;
    out.metrics.f1 = f1_score(dr, fdr);
    out.metrics.best_constancy = out.accepted().map(|c| c.gate.constancy).min_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Mean and population standard deviation of the finite values.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN, n: 0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() < 2 { 0.0 } else { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt() };
        MeanStd { mean, std, n: v.len() }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub dr: MeanStd,
    pub fdr: MeanStd,
    pub f1: MeanStd,
    /// Over the runs that accepted something.
    pub best_constancy: MeanStd,
    pub val_mse: MeanStd,
    pub mse_at_16: MeanStd,
}

pub fn compute_metrics(reports: &[RunReport]) -> Result<MetricSummary, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Invalid("no reports to summarize".into()));
    }
    let of = |f: fn(&Metrics) -> f64| MeanStd::of(reports.iter().map(|r| f(&r.metrics)));
    Ok(MetricSummary {
        dr: of(|m| m.dr),
        fdr: of(|m| m.fdr),
        f1: of(|m| m.f1),
        best_constancy: of(|m| m.best_constancy.unwrap_or(f64::NAN)),
        val_mse: of(|m| m.val_mse),
        mse_at_16: of(|m| m.mse_at_16),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub constancy: f64,
    pub complexity: usize,
}

/// `a` is at least as good in both objectives and better in one.
pub fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    a.constancy <= b.constancy
        && a.complexity <= b.complexity
        && (a.constancy < b.constancy || a.complexity < b.complexity)
}

/// Points no other point dominates, by complexity then constancy. Exact
/// duplicates do not dominate each other, so both stay. Unscored points
/// (NaN constancy) are left out.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let scored: Vec<&ParetoPoint> = points.iter().filter(|p| !p.constancy.is_nan()).collect();
    let mut front: Vec<ParetoPoint> = scored
        .iter()
        .filter(|p| !scored.iter().any(|q| dominates(q, p)))
        .map(|p| (*p).clone())
        .collect();
    front.sort_by(|a, b| a.complexity.cmp(&b.complexity).then(a.constancy.total_cmp(&b.constancy)));
    front
}

#[cfg(test)]
mod tests;
