//! Symbolic extraction: monomial-library eigenvector fits, the Lotka–Volterra
//! log basis, explicit PDE candidates, and genetic-programming regression
//! against the learned invariant network.

mod eigen;
mod expr;
pub mod gp;

pub use eigen::{smallest_eigvec, symmetric_eigen, EigenError};
pub use expr::{linear_combination, Expression, Node, ParseError, BINARY_OPS, DIV_GUARD, UNARY_OPS};
pub use gp::{gp_symreg, GpConfig, GpResult, HallEntry};

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Split, Trajectory};
use crate::neural::PhiModel;
use crate::rng::{self, label};
use crate::systems::{SystemId, SystemKind};

/// Offset inside `ln(x + eps)` for the Lotka–Volterra basis.
pub const LOG_EPS: f64 = 1e-8;
/// Relative size below which fitted weights are dropped from the rendered expression.
pub const PRUNE_RELATIVE: f64 = 1e-6;
pub const MAX_MONOMIAL_DEGREE: u32 = 4;
pub const DEFAULT_PHI_SAMPLES: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("need at least two trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("feature covariance is degenerate (all features constant along trajectories)")]
    Degenerate,
    #[error("feature overflow on trajectory {0}")]
    Overflow(usize),
    #[error("log basis needs strictly positive states; trajectory {traj} has {value}")]
    NonPositive { traj: usize, value: f64 },
    #[error("explicit candidates exist only for PDE systems, not {0}")]
    NotPde(SystemId),
    #[error("requested {requested} samples but only {available} training points exist")]
    TooManySamples { requested: usize, available: usize },
    #[error("symbolic regression needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("log basis is defined for two-dimensional states, got {0}")]
    WrongDimension(usize),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    PolyLasso,
    LvLasso,
    Explicit,
    Gp,
}

/// Weight vector over a named basis, kept alongside the rendered expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFit {
    pub basis: String,
    pub terms: Vec<Expression>,
    pub weights: Vec<f64>,
    pub lambda_min: f64,
}

impl BasisFit {
    pub fn expression(&self) -> Expression {
        linear_combination(&self.weights, &self.terms, PRUNE_RELATIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub source: Source,
    pub expression: Expression,
    pub fit: Option<BasisFit>,
}

impl Candidate {
    fn from_fit(source: Source, fit: BasisFit) -> Self {
        Candidate { source, expression: fit.expression(), fit: Some(fit) }
    }
}

/// Exponent vector of a monomial `Π x_j^{k_j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product()
    }

    pub fn expression(&self) -> Expression {
        let factors = self.0.iter().enumerate().filter(|(_, &k)| k > 0).map(|(j, &k)| {
            let v = Expression::var(j);
            match k {
                1 => v,
                2 => Expression::apply_unary(Node::Square, v),
                3 => Expression::apply_unary(Node::Cube, v),
                _ => (1..k).fold(v.clone(), |acc, _| Expression::apply_binary(Node::Mul, acc, v.clone())),
            }
        });
        factors
            .reduce(|a, b| Expression::apply_binary(Node::Mul, a, b))
            .unwrap_or_else(|| Expression::constant(1.0))
    }
}

/// All monomials with `1 ≤ degree ≤ max_degree` in graded lexicographic order:
/// by degree, then by exponent vector with higher powers of earlier variables first.
pub fn monomial_library(dim: usize, max_degree: u32) -> Vec<Monomial> {
    fn fill(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(Monomial(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            fill(dim, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 1..=max_degree {
        fill(dim, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Centred `T × M` feature matrix of a single trajectory.
pub fn build_features<F: Fn(&[f64], &mut [f64])>(
    states: &[f64],
    dim: usize,
    n_features: usize,
    features: F,
) -> Option<Array2<f64>> {
    let steps = states.len() / dim;
    let mut p = Array2::zeros((steps, n_features));
    for (t, x) in states.chunks_exact(dim).enumerate() {
        let row = p.row_mut(t).into_slice().expect("standard layout");
        features(x, row);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mean = p.mean_axis(ndarray::Axis(0)).expect("nonempty");
    p -= &mean;
    // Columns constant up to rounding would otherwise leave spurious spread.
    for (mut col, m) in p.columns_mut().into_iter().zip(mean.iter()) {
        let spread = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if spread <= 1e-13 * m.abs() {
            col.fill(0.0);
        }
    }
    Some(p)
}

pub fn build_monomial_features(traj: &Trajectory, dim: usize, library: &[Monomial]) -> Option<Array2<f64>> {
    build_features(&traj.states, dim, library.len(), |x, row| {
        for (slot, m) in row.iter_mut().zip(library) {
            *slot = m.eval(x);
        }
    })
}

/// Mean per-trajectory scatter `(1/N) Σ P_iᵀ P_i` of centred features.
fn scatter(mats: &[Array2<f64>]) -> Array2<f64> {
    let m = mats[0].ncols();
    let mut c = Array2::zeros((m, m));
    for p in mats {
        c += &p.t().dot(p);
    }
    c / mats.len() as f64
}

fn eigen_fit(mats: &[Array2<f64>], basis: &str, terms: Vec<Expression>) -> Result<BasisFit, ExtractError> {
    let c = scatter(mats);
    if c.iter().all(|&v| v == 0.0) {
        return Err(ExtractError::Degenerate);
    }
    let (lambda_min, w) = smallest_eigvec(&c)?;
    Ok(BasisFit { basis: basis.to_string(), terms, weights: w.to_vec(), lambda_min })
}

/// Minimum-variance combination of monomials up to degree four.
pub fn poly_lasso(trajs: &[&Trajectory], dim: usize) -> Result<BasisFit, ExtractError> {
    if trajs.len() < 2 {
        return Err(ExtractError::TooFewTrajectories(trajs.len()));
    }
    let library = monomial_library(dim, MAX_MONOMIAL_DEGREE);
    let mats = trajs
        .iter()
        .map(|t| build_monomial_features(t, dim, &library).ok_or(ExtractError::Overflow(t.traj_id)))
        .collect::<Result<Vec<_>, _>>()?;
    let terms = library.iter().map(Monomial::expression).collect();
    eigen_fit(&mats, "monomials_grlex_deg4", terms)
}

/// Minimum-variance combination of `x, y, ln(x+ε), ln(y+ε)`.
pub fn lv_lasso(trajs: &[&Trajectory], dim: usize) -> Result<BasisFit, ExtractError> {
    if dim != 2 {
        return Err(ExtractError::WrongDimension(dim));
    }
    if trajs.len() < 2 {
        return Err(ExtractError::TooFewTrajectories(trajs.len()));
    }
    let mut mats = Vec::with_capacity(trajs.len());
    for t in trajs {
        if let Some(&value) = t.states.iter().find(|&&v| !(v > 0.0)) {
            return Err(ExtractError::NonPositive { traj: t.traj_id, value });
        }
        let p = build_features(&t.states, 2, 4, |x, row| {
            row.copy_from_slice(&[x[0], x[1], (x[0] + LOG_EPS).ln(), (x[1] + LOG_EPS).ln()]);
        })
        .ok_or(ExtractError::Overflow(t.traj_id))?;
        mats.push(p);
    }
    let log = |j| {
        Expression::apply_unary(
            Node::Log,
            Expression::apply_binary(Node::Add, Expression::var(j), Expression::constant(LOG_EPS)),
        )
    };
    let terms = vec![Expression::var(0), Expression::var(1), log(0), log(1)];
    eigen_fit(&mats, "lotka_volterra_log", terms)
}

pub fn poly_lasso_candidate(trajs: &[&Trajectory], dim: usize) -> Result<Candidate, ExtractError> {
    poly_lasso(trajs, dim).map(|f| Candidate::from_fit(Source::PolyLasso, f))
}

pub fn lv_lasso_candidate(trajs: &[&Trajectory], dim: usize) -> Result<Candidate, ExtractError> {
    lv_lasso(trajs, dim).map(|f| Candidate::from_fit(Source::LvLasso, f))
}

/// The spatial mean (first reduced coordinate) of a PDE system.
pub fn explicit_pde_candidates(system: SystemId) -> Result<Vec<Candidate>, ExtractError> {
    if system.kind() != SystemKind::Pde {
        return Err(ExtractError::NotPde(system));
    }
    Ok(vec![Candidate { source: Source::Explicit, expression: Expression::var(0), fit: None }])
}

/// State–φ pairs for symbolic regression, states in raw coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSamples {
    pub dim: usize,
    /// `columns[d][s]`: variable `d` at sample `s`.
    pub columns: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl PhiSamples {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn column_refs(&self) -> Vec<&[f64]> {
        self.columns.iter().map(Vec::as_slice).collect()
    }
}

/// Draws `n` distinct (trajectory, time) points from the training split and
/// evaluates `phi` on them. Points come back in a seed-determined order.
pub fn sample_phi_pairs(phi: &PhiModel, ds: &Dataset, n: usize, seed: u64) -> Result<PhiSamples, ExtractError> {
    let train = ds.split(Split::Train);
    let available = train.len() * ds.steps;
    if n > available {
        return Err(ExtractError::TooManySamples { requested: n, available });
    }
    // Partial Fisher–Yates over flat point indices.
    let mut rng = rng::stream(seed, &[label::PAIRS]);
    let mut idx: Vec<usize> = (0..available).collect();
    for i in 0..n {
        let j = rng.gen_range(i..available);
        idx.swap(i, j);
    }
    let dim = ds.dim;
    let mut rows = Vec::with_capacity(n * dim);
    for &flat in &idx[..n] {
        let (ti, step) = (flat / ds.steps, flat % ds.steps);
        rows.extend_from_slice(train[ti].state(step, dim));
    }
    let values = phi.eval_rows(&rows, dim);
    let columns = (0..dim).map(|d| rows.iter().skip(d).step_by(dim).copied().collect()).collect();
    Ok(PhiSamples { dim, columns, values })
}

/// Per-trajectory means of `expr` on `trajs`; handy for reporting.
pub fn trajectory_means(expr: &Expression, trajs: &[&Trajectory], dim: usize) -> Array1<f64> {
    trajs
        .iter()
        .map(|t| {
            let v = expr.eval_rows(&t.states, dim);
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}
