//! Browser bindings for three small operations on the benchmark systems.
//!
//! Every export takes plain arguments and returns a JSON string, so the same
//! functions run natively in tests and behind `wasm-bindgen` in the page.

use conslaw::dataset::{generate, GenerateOptions, Split};
use conslaw::extract::{lv_lasso_candidate, poly_lasso_candidate};
use conslaw::systems::{true_invariant, SystemId, SystemKind};
use conslaw::verify::{adjudicate, evaluate_series, gate_series, GateConfig, RejectReason, Verdict};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_STEPS: usize = 2000;
const MAX_TRAJ: usize = 200;

fn system(name: &str) -> Result<SystemId, String> {
    name.parse().map_err(|e| format!("{e}"))
}

fn check(what: &str, v: usize, lo: usize, hi: usize) -> Result<(), String> {
    if v < lo || v > hi {
        return Err(format!("{what} must be in {lo}..={hi}, got {v}"));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Simulation {
    system: SystemId,
    dim: usize,
    times: Vec<f64>,
    /// Row-major `steps × dim`.
    states: Vec<f64>,
    /// The closed-form invariant along the path, when the system has one.
    invariant: Option<Vec<f64>>,
    /// Largest `|H(t) − H(0)| / |H(0)|`.
    relative_drift: Option<f64>,
}

/// Integrates one trajectory of an ODE system.
#[wasm_bindgen]
pub fn simulate(system_name: &str, seed: u32, steps: usize) -> Result<String, String> {
    let id = system(system_name)?;
    if id.kind() != SystemKind::Ode {
        return Err(format!("{id} is a field equation; use pde_moments"));
    }
    check("steps", steps, 2, MAX_STEPS)?;
    let ds = generate(id, seed as u64, &GenerateOptions { n_traj: Some(3), steps: Some(steps) }).map_err(|e| e.to_string())?;
    let tr = &ds.trajectories[0];
    let invariant: Option<Vec<f64>> = id
        .has_true_law()
        .then(|| tr.rows(ds.dim).map(|x| true_invariant(id, x, &tr.params).unwrap_or(f64::NAN)).collect());
    let relative_drift = invariant.as_ref().map(|h| {
        let h0 = h[0];
        h.iter().map(|v| (v - h0).abs() / h0.abs().max(1e-300)).fold(0.0, f64::max)
    });
    to_json(&Simulation { system: id, dim: ds.dim, times: ds.times.clone(), states: tr.states.clone(), invariant, relative_drift })
}

#[derive(Serialize)]
struct Extraction {
    system: SystemId,
    basis: String,
    expression: String,
    complexity: usize,
    lambda_min: f64,
    constancy: f64,
    rho: f64,
    accepted: bool,
    reason: Option<RejectReason>,
    verdict: Verdict,
}

/// Generates a small dataset and runs the convex variance-minimizing fit
/// (monomials, or the log basis for Lotka–Volterra), then gates the result
/// on held-out trajectories.
#[wasm_bindgen]
pub fn extract_invariant(system_name: &str, seed: u32, n_traj: usize, steps: usize) -> Result<String, String> {
    let id = system(system_name)?;
    if id.kind() != SystemKind::Ode {
        return Err(format!("{id} has no state-space polynomial fit"));
    }
    check("trajectories", n_traj, 10, MAX_TRAJ)?;
    check("steps", steps, 10, MAX_STEPS)?;
    let ds = generate(id, seed as u64, &GenerateOptions { n_traj: Some(n_traj), steps: Some(steps) })
        .map_err(|e| e.to_string())?;
    let train = ds.split(Split::Train);
    let cand = if id == SystemId::LotkaVolterra {
        lv_lasso_candidate(&train, ds.dim)
    } else {
        poly_lasso_candidate(&train, ds.dim)
    }
    .map_err(|e| e.to_string())?;
    let fit = cand.fit.as_ref().expect("basis fits carry their weights");
    let test = ds.split(Split::Test);
    let series = evaluate_series(&cand.expression, &test, ds.dim);
    let gate = gate_series(&series, cand.expression.complexity(), &GateConfig::default());
    to_json(&Extraction {
        system: id,
        basis: fit.basis.clone(),
        expression: cand.expression.to_infix(),
        complexity: cand.expression.complexity(),
        lambda_min: fit.lambda_min,
        constancy: gate.constancy,
        rho: gate.rho,
        accepted: gate.accepted,
        reason: gate.reason,
        verdict: adjudicate(id, &series, &test, ds.dim),
    })
}

#[derive(Serialize)]
struct Moments {
    system: SystemId,
    times: Vec<f64>,
    mean: Vec<f64>,
    variance: Vec<f64>,
    skewness: Vec<f64>,
}

/// Spatial mean, variance and skewness of one simulated field.
#[wasm_bindgen]
pub fn pde_moments(system_name: &str, seed: u32, steps: usize) -> Result<String, String> {
    let id = system(system_name)?;
    if id.kind() != SystemKind::Pde {
        return Err(format!("{id} is not a field equation"));
    }
    check("steps", steps, 2, MAX_STEPS)?;
    let ds = generate(id, seed as u64, &GenerateOptions { n_traj: Some(3), steps: Some(steps) }).map_err(|e| e.to_string())?;
    let rows: Vec<&[f64]> = ds.trajectories[0].rows(ds.dim).collect();
    to_json(&Moments {
        system: id,
        times: ds.times.clone(),
        mean: rows.iter().map(|r| r[0]).collect(),
        variance: rows.iter().map(|r| r[1]).collect(),
        skewness: rows.iter().map(|r| r[2]).collect(),
    })
}

/// Names of every system, for the page's selectors.
#[wasm_bindgen]
pub fn system_names() -> String {
    let names: Vec<&str> = SystemId::ALL.iter().map(|s| s.name()).collect();
    serde_json::to_string(&names).expect("plain strings")
}
