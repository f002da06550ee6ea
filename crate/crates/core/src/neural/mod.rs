//! From-scratch MLPs with hand-written reverse-mode gradients, Adam, learning
//! rate schedules, and the two training stages: a frozen one-step dynamics
//! model and the multi-restart variance-ratio invariant network.

mod checkpoint;
mod mlp;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{Mlp, Standardizer};
pub use train::{
    rollout_mse, select_best, train_dynamics, train_phi_restarts, DynamicsConfig, DynamicsMetrics, DynamicsModel,
    PhiConfig, PhiModel, PhiTraining, RestartResult,
};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("variance loss needs at least two trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("all {0} restarts diverged")]
    AllRestartsDiverged(usize),
    #[error("dataset split `{0}` is empty")]
    EmptySplit(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Residual one-step loss `mean_rows ‖x + g(x) − y‖²` and its gradient.
///
/// The network `g` models the increment, so the full predictor is `x + g(x)`.
pub fn grad_dyn_loss(net: &Mlp, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<(f64, Vec<f64>), NeuralError> {
    if x.dim() != y.dim() {
        return Err(NeuralError::Shape { expected: x.len(), got: y.len() });
    }
    if net.output_dim() != x.ncols() {
        return Err(NeuralError::Shape { expected: x.ncols(), got: net.output_dim() });
    }
    let trace = net.forward_trace(x)?;
    let mut r = trace.output() + &x;
    r -= &y;
    let n = x.nrows().max(1) as f64;
    let loss = r.iter().map(|v| v * v).sum::<f64>() / n;
    let dout = r.mapv(|v| 2.0 * v / n);
    Ok((loss, net.backward(&trace, dout)))
}

/// Components of the variance-ratio loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiLoss {
    pub total: f64,
    /// Mean intra-trajectory variance.
    pub intra: f64,
    /// Variance of per-trajectory means.
    pub inter: f64,
}

/// Variance-ratio loss over `n_traj` equal-length trajectories stacked in `x`
/// (trajectory-major rows):
/// `mean_i Var_t φ / (Var_i mean_t φ + eps) + weight_decay · ‖ψ‖²`.
pub fn grad_phi_loss(
    net: &Mlp,
    x: ArrayView2<f64>,
    n_traj: usize,
    eps: f64,
    weight_decay: f64,
) -> Result<(PhiLoss, Vec<f64>), NeuralError> {
    if n_traj < 2 {
        return Err(NeuralError::TooFewTrajectories(n_traj));
    }
    if x.nrows() % n_traj != 0 || net.output_dim() != 1 {
        return Err(NeuralError::Shape { expected: n_traj, got: x.nrows() });
    }
    let t = x.nrows() / n_traj;
    let trace = net.forward_trace(x)?;
    let v = trace.output().column(0).to_owned();
    let means: Vec<f64> = (0..n_traj).map(|i| v.slice(ndarray::s![i * t..(i + 1) * t]).mean().expect("t > 0")).collect();
    let grand = means.iter().sum::<f64>() / n_traj as f64;
    let nt = (n_traj * t) as f64;
    let intra = v.iter().enumerate().map(|(k, &vk)| (vk - means[k / t]).powi(2)).sum::<f64>() / nt;
    let inter = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / n_traj as f64;
    let denom = inter + eps;
    let total = intra / denom + weight_decay * net.sq_norm();
    let mut dout = Array2::zeros((x.nrows(), 1));
    for (k, &vk) in v.iter().enumerate() {
        let m = means[k / t];
        let d_intra = 2.0 / nt * (vk - m);
        let d_inter = 2.0 / nt * (m - grand);
        dout[[k, 0]] = d_intra / denom - intra / (denom * denom) * d_inter;
    }
    let mut grads = net.backward(&trace, dout);
    grads.iter_mut().zip(net.params()).for_each(|(g, p)| *g += 2.0 * weight_decay * p);
    Ok((PhiLoss { total, intra, inter }, grads))
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Linear warmup from `peak/25` to `peak` over `warmup` of the run, then
    /// cosine decay to `final_lr`.
    OneCycle { peak: f64, final_lr: f64, warmup: f64 },
    /// Cosine annealing from `base` to `min`.
    Cosine { base: f64, min: f64 },
}

impl Schedule {
    pub fn one_cycle() -> Self {
        Schedule::OneCycle { peak: 1e-3, final_lr: 1e-5, warmup: 0.3 }
    }

    pub fn cosine() -> Self {
        Schedule::Cosine { base: 1e-3, min: 0.0 }
    }

    /// Learning rate at `step` of `total` (`0 ≤ step < total`).
    pub fn lr(&self, step: usize, total: usize) -> f64 {
        let frac = if total <= 1 { 0.0 } else { step as f64 / (total - 1) as f64 };
        let cos = |x: f64| 0.5 * (1.0 + (std::f64::consts::PI * x.clamp(0.0, 1.0)).cos());
        match *self {
            Schedule::OneCycle { peak, final_lr, warmup } => {
                let start = peak / 25.0;
                if frac < warmup {
                    start + (peak - start) * frac / warmup
                } else {
                    final_lr + (peak - final_lr) * cos((frac - warmup) / (1.0 - warmup))
                }
            }
            Schedule::Cosine { base, min } => min + (base - min) * cos(frac),
        }
    }
}

#[cfg(test)]
mod tests;
