use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grad_dyn_loss, grad_phi_loss, Adam, Mlp, NeuralError, Schedule, Standardizer};
use crate::dataset::{Dataset, Split, Trajectory};
use crate::rng::{self, label};
use crate::verify;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Caps minibatches per epoch; `None` sweeps every training pair.
    pub batches_per_epoch: Option<usize>,
    pub patience: usize,
    pub schedule: Schedule,
    pub rollout_horizon: usize,
}

impl DynamicsConfig {
    pub fn paper() -> Self {
        DynamicsConfig {
            hidden: vec![256, 256],
            max_epochs: 100,
            batch_size: 128,
            batches_per_epoch: None,
            patience: 10,
            schedule: Schedule::one_cycle(),
            rollout_horizon: 16,
        }
    }

    pub fn desk() -> Self {
        DynamicsConfig { max_epochs: 20, batches_per_epoch: Some(16), ..Self::paper() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiConfig {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    /// Whole trajectories per minibatch.
    pub batch_trajectories: usize,
    pub patience: usize,
    pub schedule: Schedule,
    pub weight_decay: f64,
    pub loss_eps: f64,
    /// Keeps every `time_stride`-th state of each training trajectory.
    pub time_stride: usize,
}

impl PhiConfig {
    pub fn paper() -> Self {
        PhiConfig {
            hidden: vec![64, 64, 64],
            max_epochs: 300,
            batch_trajectories: 32,
            patience: 20,
            schedule: Schedule::cosine(),
            weight_decay: 1e-4,
            loss_eps: 1e-4,
            time_stride: 1,
        }
    }

    pub fn desk() -> Self {
        PhiConfig { max_epochs: 60, batch_trajectories: 8, time_stride: 4, ..Self::paper() }
    }
}

/// Frozen one-step predictor `x ↦ x + g(x)` in standardized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub net: Mlp,
    pub scaler: Standardizer,
}

impl DynamicsModel {
    fn predict_z(&self, z: &Array2<f64>) -> Array2<f64> {
        self.net.forward(z.view()).expect("shapes fixed at training") + z
    }

    /// Next states for row-major `rows`.
    pub fn predict_rows(&self, rows: &[f64]) -> Vec<f64> {
        let z = self.scaler.transform(rows);
        self.scaler.inverse(&self.predict_z(&z)).into_raw_vec_and_offset().0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsMetrics {
    /// Best validation one-step MSE per state component, raw units.
    pub val_mse: f64,
    pub mse_at_16: f64,
    pub epochs: usize,
}

/// Invariant network with its input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiModel {
    pub net: Mlp,
    pub scaler: Standardizer,
}

impl PhiModel {
    pub fn eval_rows(&self, rows: &[f64], _dim: usize) -> Vec<f64> {
        let z = self.scaler.transform(rows);
        self.net.forward(z.view()).expect("shapes fixed at training").column(0).to_vec()
    }

    pub fn series(&self, trajs: &[&Trajectory], dim: usize) -> Vec<Vec<f64>> {
        trajs.iter().map(|t| self.eval_rows(&t.states, dim)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    pub index: usize,
    pub model: PhiModel,
    /// Infinite when the restart diverged.
    pub val_constancy: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTraining {
    pub restarts: Vec<RestartResult>,
    pub best: usize,
}

impl PhiTraining {
    pub fn best_model(&self) -> &PhiModel {
        &self.restarts[self.best].model
    }

    pub fn constancies(&self) -> Vec<f64> {
        self.restarts.iter().map(|r| r.val_constancy).collect()
    }
}

/// Index of the lowest finite value, earliest on ties.
pub fn select_best(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.map_or(true, |b| v < values[b]) {
            best = Some(i);
        }
    }
    best
}

fn all_rows(trajs: &[&Trajectory]) -> Vec<f64> {
    trajs.iter().flat_map(|t| t.states.iter().copied()).collect()
}

/// (x_t, x_{t+1}) rows over every consecutive pair.
fn pairs(trajs: &[&Trajectory], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for t in trajs {
        let n = t.states.len();
        x.extend_from_slice(&t.states[..n - dim]);
        y.extend_from_slice(&t.states[dim..]);
    }
    (x, y)
}

fn take_rows(a: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    a.select(Axis(0), idx)
}

/// Mean squared error per component of `horizon`-step autoregressive rollouts,
/// launched every `horizon` steps along each trajectory and averaged over the
/// rollout steps.
pub fn rollout_mse(model: &DynamicsModel, trajs: &[&Trajectory], dim: usize, horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let mut starts = Vec::new();
    for (i, t) in trajs.iter().enumerate() {
        let steps = t.states.len() / dim;
        let mut s = 0;
        while s + horizon < steps {
            starts.push((i, s));
            s += horizon;
        }
    }
    if starts.is_empty() {
        return f64::NAN;
    }
    let mut rows: Vec<f64> = starts.iter().flat_map(|&(i, s)| trajs[i].state(s, dim).to_vec()).collect();
    let mut err = 0.0;
    for k in 1..=horizon {
        rows = model.predict_rows(&rows);
        for (b, &(i, s)) in starts.iter().enumerate() {
            let truth = trajs[i].state(s + k, dim);
            err += rows[b * dim..(b + 1) * dim].iter().zip(truth).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        }
    }
    err / (starts.len() * horizon * dim) as f64
}

fn one_step_mse(model: &DynamicsModel, x: &[f64], y: &[f64]) -> f64 {
    let pred = model.predict_rows(x);
    pred.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / y.len() as f64
}

/// Trains the one-step dynamics model on the training split with early
/// stopping on validation MSE, then scores rollouts on the test split.
pub fn train_dynamics(
    ds: &Dataset,
    cfg: &DynamicsConfig,
    seed: u64,
) -> Result<(DynamicsModel, DynamicsMetrics), NeuralError> {
    let dim = ds.dim;
    let (train, val, test) = (ds.split(Split::Train), ds.split(Split::Val), ds.split(Split::Test));
    if train.is_empty() {
        return Err(NeuralError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(NeuralError::EmptySplit("val"));
    }
    let scaler = Standardizer::fit(&all_rows(&train), dim);
    let (x, y) = pairs(&train, dim);
    let (zx, zy) = (scaler.transform(&x), scaler.transform(&y));
    let (vx, vy) = pairs(&val, dim);

    let mut rng = rng::stream(seed, &[label::DYNAMICS]);
    let mut sizes = vec![dim];
    sizes.extend(&cfg.hidden);
    sizes.push(dim);
    let mut model = DynamicsModel { net: Mlp::new(&sizes, &mut rng), scaler };
    let mut adam = Adam::new(model.net.params().len());

    let n = zx.nrows();
    let full_batches = n.div_ceil(cfg.batch_size);
    let per_epoch = cfg.batches_per_epoch.map_or(full_batches, |b| b.min(full_batches));
    let total = cfg.max_epochs * per_epoch;
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, model.net.clone(), 0usize);
    let mut step = 0;
    let mut epochs = 0;
    for epoch in 0..cfg.max_epochs {
        epochs = epoch + 1;
        rng::shuffle(&mut order, &mut rng);
        for b in 0..per_epoch {
            let idx = &order[b * cfg.batch_size..((b + 1) * cfg.batch_size).min(n)];
            let (loss, grads) = grad_dyn_loss(&model.net, take_rows(&zx, idx).view(), take_rows(&zy, idx).view())?;
            if !loss.is_finite() {
                return Err(NeuralError::Diverged { epoch, loss });
            }
            let lr = cfg.schedule.lr(step, total);
            adam.step(model.net.params_mut(), &grads, lr);
            step += 1;
        }
        let val_mse = one_step_mse(&model, &vx, &vy);
        if !val_mse.is_finite() {
            return Err(NeuralError::Diverged { epoch, loss: val_mse });
        }
        if val_mse < best.0 {
            best = (val_mse, model.net.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    model.net = best.1;
    let mse_at_16 = if test.is_empty() { f64::NAN } else { rollout_mse(&model, &test, dim, cfg.rollout_horizon) };
    Ok((model, DynamicsMetrics { val_mse: best.0, mse_at_16, epochs }))
}

/// Standardized, time-strided trajectories stacked for batching.
fn strided(scaler: &Standardizer, trajs: &[&Trajectory], dim: usize, stride: usize) -> Vec<Array2<f64>> {
    trajs
        .iter()
        .map(|t| {
            let rows: Vec<f64> = t.states.chunks_exact(dim).step_by(stride.max(1)).flatten().copied().collect();
            scaler.transform(&rows)
        })
        .collect()
}

fn train_restart(
    index: usize,
    train: &[Array2<f64>],
    val: &[&Trajectory],
    scaler: &Standardizer,
    dim: usize,
    cfg: &PhiConfig,
    seed: u64,
) -> RestartResult {
    let mut rng = rng::stream(seed, &[label::PHI, index as u64]);
    let mut sizes = vec![dim];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut model = PhiModel { net: Mlp::new(&sizes, &mut rng), scaler: scaler.clone() };
    let mut adam = Adam::new(model.net.params().len());

    let n = train.len();
    let bs = cfg.batch_trajectories.max(2);
    // A trailing batch of one trajectory has no inter-trajectory variance; fold it in.
    let mut n_batches = n.div_ceil(bs);
    if n_batches > 1 && n % bs == 1 {
        n_batches -= 1;
    }
    let total = cfg.max_epochs * n_batches;
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, model.net.clone(), 0usize);
    let mut step = 0;
    let mut epochs = 0;
    for epoch in 0..cfg.max_epochs {
        epochs = epoch + 1;
        rng::shuffle(&mut order, &mut rng);
        let mut diverged = false;
        for b in 0..n_batches {
            let end = if b + 1 == n_batches { n } else { (b + 1) * bs };
            let views: Vec<ArrayView2<f64>> = order[b * bs..end].iter().map(|&i| train[i].view()).collect();
            let stacked = concatenate(Axis(0), &views).expect("equal widths");
            let Ok((loss, grads)) =
                grad_phi_loss(&model.net, stacked.view(), views.len(), cfg.loss_eps, cfg.weight_decay)
            else {
                diverged = true;
                break;
            };
            if !loss.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                diverged = true;
                break;
            }
            adam.step(model.net.params_mut(), &grads, cfg.schedule.lr(step, total));
            step += 1;
        }
        if diverged {
            break;
        }
        let c = verify::constancy(&model.series(val, dim), verify::EPS).unwrap_or(f64::INFINITY);
        if c < best.0 {
            best = (c, model.net.clone(), epoch);
        } else if !c.is_finite() || epoch - best.2 >= cfg.patience {
            break;
        }
    }
    model.net = best.1;
    RestartResult { index, model, val_constancy: best.0, epochs }
}

/// Runs `restarts` independently initialized trainings of the invariant
/// network and selects the one with the lowest validation constancy.
pub fn train_phi_restarts(ds: &Dataset, restarts: usize, cfg: &PhiConfig, seed: u64) -> Result<PhiTraining, NeuralError> {
    let dim = ds.dim;
    let (train, val) = (ds.split(Split::Train), ds.split(Split::Val));
    if train.len() < 2 {
        return Err(NeuralError::TooFewTrajectories(train.len()));
    }
    if val.is_empty() {
        return Err(NeuralError::EmptySplit("val"));
    }
    let scaler = Standardizer::fit(&all_rows(&train), dim);
    let batches = strided(&scaler, &train, dim, cfg.time_stride);
    let results: Vec<RestartResult> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| train_restart(r, &batches, &val, &scaler, dim, cfg, seed))
        .collect();
    let constancies: Vec<f64> = results.iter().map(|r| r.val_constancy).collect();
    let best = select_best(&constancies).ok_or(NeuralError::AllRestartsDiverged(results.len()))?;
    Ok(PhiTraining { restarts: results, best })
}
