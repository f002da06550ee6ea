//! Candidate verification: the constancy metric, the diversity ratio, the strict
//! acceptance gate, and adjudication of accepted candidates against ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Trajectory;
use crate::extract::Expression;
use crate::systems::{self, SystemId};

/// Denominator floor shared by [`constancy`] and [`diversity_rho`].
pub const EPS: f64 = 1e-8;

/// Minimum |Spearman| between per-trajectory levels for a true discovery.
pub const RANK_CORRELATION_MIN: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("no series given")]
    Empty,
    #[error("series {0} has fewer than two samples")]
    TooShort(usize),
    #[error("diversity needs at least two trajectories, got {0}")]
    TooFewTrajectories(usize),
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check<S: AsRef<[f64]>>(series: &[S]) -> Result<(), VerifyError> {
    if series.is_empty() {
        return Err(VerifyError::Empty);
    }
    match series.iter().position(|s| s.as_ref().len() < 2) {
        Some(i) => Err(VerifyError::TooShort(i)),
        None => Ok(()),
    }
}

/// Mean over trajectories of `std_t / (|mean_t| + eps)`, population std.
pub fn constancy<S: AsRef<[f64]>>(series: &[S], eps: f64) -> Result<f64, VerifyError> {
    check(series)?;
    let total: f64 = series
        .iter()
        .map(|s| {
            let (m, sd) = mean_std(s.as_ref());
            sd / (m.abs() + eps)
        })
        .sum();
    Ok(total / series.len() as f64)
}

/// Spread of per-trajectory means over the typical within-trajectory std.
pub fn diversity_rho<S: AsRef<[f64]>>(series: &[S], eps: f64) -> Result<f64, VerifyError> {
    check(series)?;
    if series.len() < 2 {
        return Err(VerifyError::TooFewTrajectories(series.len()));
    }
    let (means, stds): (Vec<f64>, Vec<f64>) = series.iter().map(|s| mean_std(s.as_ref())).unzip();
    let (_, inter) = mean_std(&means);
    let intra = stds.iter().sum::<f64>() / stds.len() as f64;
    Ok(inter / (intra + eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub tau: f64,
    pub rho_min: f64,
    pub eps: f64,
    /// Candidates invalid on more than this fraction of test points are rejected.
    pub max_invalid_fraction: f64,
    /// Node-count cap, used for PDE systems.
    pub max_complexity: Option<usize>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { tau: 0.01, rho_min: 10.0, eps: EPS, max_invalid_fraction: 0.01, max_complexity: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Invalid,
    Complexity,
    Constancy,
    Diversity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    /// NaN when the candidate could not be scored.
    pub constancy: f64,
    pub rho: f64,
    pub invalid_fraction: f64,
    pub accepted: bool,
    pub reason: Option<RejectReason>,
}

/// Evaluates `expr` along every trajectory (row-major `steps × dim` states).
pub fn evaluate_series(expr: &Expression, trajs: &[&Trajectory], dim: usize) -> Vec<Vec<f64>> {
    trajs
        .iter()
        .map(|t| {
            let steps = t.states.len() / dim;
            let cols: Vec<Vec<f64>> = (0..dim).map(|d| (0..steps).map(|s| t.states[s * dim + d]).collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            expr.eval_columns(&refs)
        })
        .collect()
}

/// Rejection reason for scored values, `None` when the candidate passes.
/// Checks run in a fixed order: validity, complexity, constancy, diversity.
pub fn gate_decision(
    constancy: f64,
    rho: f64,
    invalid_fraction: f64,
    complexity: usize,
    cfg: &GateConfig,
) -> Option<RejectReason> {
    if invalid_fraction > cfg.max_invalid_fraction || constancy.is_nan() || rho.is_nan() {
        Some(RejectReason::Invalid)
    } else if cfg.max_complexity.is_some_and(|cap| complexity > cap) {
        Some(RejectReason::Complexity)
    } else if !(constancy < cfg.tau) {
        Some(RejectReason::Constancy)
    } else if !(rho >= cfg.rho_min) {
        Some(RejectReason::Diversity)
    } else {
        None
    }
}

/// Applies the gate to already-evaluated per-trajectory series.
///
/// Non-finite entries count as invalid; when their share is tolerable they are
/// dropped before scoring.
pub fn gate_series(series: &[Vec<f64>], complexity: usize, cfg: &GateConfig) -> GateRecord {
    let total: usize = series.iter().map(Vec::len).sum();
    let invalid = series.iter().flatten().filter(|v| !v.is_finite()).count();
    let invalid_fraction = if total == 0 { 1.0 } else { invalid as f64 / total as f64 };
    let (c, rho) = if invalid_fraction > cfg.max_invalid_fraction {
        (f64::NAN, f64::NAN)
    } else {
        let cleaned: Vec<Vec<f64>> =
            series.iter().map(|s| s.iter().copied().filter(|v| v.is_finite()).collect()).collect();
        match (constancy(&cleaned, cfg.eps), diversity_rho(&cleaned, cfg.eps)) {
            (Ok(c), Ok(rho)) => (c, rho),
            _ => (f64::NAN, f64::NAN),
        }
    };
    let reason = gate_decision(c, rho, invalid_fraction, complexity, cfg);
    GateRecord { constancy: c, rho, invalid_fraction, accepted: reason.is_none(), reason }
}

/// Evaluates each expression on the test trajectories and gates it.
pub fn apply_gate(exprs: &[&Expression], trajs: &[&Trajectory], dim: usize, cfg: &GateConfig) -> Vec<GateRecord> {
    use rayon::prelude::*;
    exprs
        .par_iter()
        .map(|e| gate_series(&evaluate_series(e, trajs, dim), e.complexity(), cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TrueDiscovery,
    Spurious,
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side has no rank spread.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, sa) = mean_std(&ra);
    let (mb, sb) = mean_std(&rb);
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    let cov = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / ra.len() as f64;
    cov / (sa * sb)
}

/// Decides whether an accepted candidate is the system's conserved quantity.
///
/// `candidate_series` holds the candidate's values along each of `trajs`.
/// A candidate is a true discovery when its per-trajectory levels are rank
/// correlated (either sign) with those of the true invariant; on systems
/// without a law every acceptance is spurious.
pub fn adjudicate(system: SystemId, candidate_series: &[Vec<f64>], trajs: &[&Trajectory], dim: usize) -> Verdict {
    if !system.has_true_law() || trajs.len() < 2 {
        return Verdict::Spurious;
    }
    let level = |s: &[f64]| {
        let finite: Vec<f64> = s.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        }
    };
    let cand: Vec<f64> = candidate_series.iter().map(|s| level(s)).collect();
    let truth: Vec<f64> = trajs
        .iter()
        .map(|t| {
            let vals: Vec<f64> = t
                .rows(dim)
                .map(|x| systems::true_invariant(system, x, &t.params).unwrap_or(f64::NAN))
                .collect();
            level(&vals)
        })
        .collect();
    if cand.iter().chain(&truth).any(|v| !v.is_finite()) {
        return Verdict::Spurious;
    }
    if spearman(&cand, &truth).abs() >= RANK_CORRELATION_MIN {
        Verdict::TrueDiscovery
    } else {
        Verdict::Spurious
    }
}
