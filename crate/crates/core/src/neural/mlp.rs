use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Fully connected network with tanh hidden layers and a linear output layer.
///
/// Parameters live in one flat vector, layer by layer: the `out × in`
/// weight matrix (row-major) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, for backpropagation.
pub(crate) struct Trace {
    /// `acts[0]` is the input; `acts[l]` the output of layer `l`.
    acts: Vec<Array2<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("at least input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "need input and output sizes");
        Mlp { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] }
    }

    /// Weights and biases uniform in `±1/√fan_in` per layer.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Mlp::zeros(sizes);
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = w[0] * w[1] + w[1];
            for p in &mut net.params[off..off + n] {
                *p = rng.gen_range(-bound..bound);
            }
            off += n;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NeuralError> {
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(NeuralError::Shape { expected, got: params.len() });
        }
        Ok(Mlp { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn sq_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }

    fn layers(&self) -> impl Iterator<Item = (ArrayView2<'_, f64>, ArrayView1<'_, f64>)> {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let (n_in, n_out) = (w[0], w[1]);
            let wm = ArrayView2::from_shape((n_out, n_in), &self.params[off..off + n_in * n_out]).expect("sized");
            let b = ArrayView1::from(&self.params[off + n_in * n_out..off + n_in * n_out + n_out]);
            off += n_in * n_out + n_out;
            (wm, b)
        })
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), NeuralError> {
        if x.ncols() != self.input_dim() {
            return Err(NeuralError::Shape { expected: self.input_dim(), got: x.ncols() });
        }
        Ok(())
    }

    pub(crate) fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace, NeuralError> {
        self.check_input(&x)?;
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.layers().enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += &b;
            if l + 1 < n_layers {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        Ok(Trace { acts })
    }

    /// Batch forward pass: one sample per row.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.acts.pop().expect("output"))
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient `dout` at the network output.
    pub(crate) fn backward(&self, trace: &Trace, dout: Array2<f64>) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let layers: Vec<_> = self.layers().collect();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = dout;
        for l in (0..layers.len()).rev() {
            let (w, _) = layers[l];
            let input = &trace.acts[l];
            let (n_out, n_in) = w.dim();
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            let o = offsets[l];
            grads[o..o + n_out * n_in].copy_from_slice(gw.as_slice().expect("standard layout"));
            grads[o + n_out * n_in..o + n_out * n_in + n_out].copy_from_slice(gb.as_slice().expect("contiguous"));
            if l > 0 {
                let mut prev = delta.dot(&w);
                prev.zip_mut_with(input, |d, &h| *d *= 1.0 - h * h);
                delta = prev;
            }
        }
        grads
    }
}

/// Per-dimension z-scoring with statistics from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on row-major `rows`; dimensions with no spread keep unit scale.
    pub fn fit(rows: &[f64], dim: usize) -> Self {
        let n = (rows.len() / dim).max(1) as f64;
        let mut mean = vec![0.0; dim];
        for x in rows.chunks_exact(dim) {
            mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; dim];
        for x in rows.chunks_exact(dim) {
            var.iter_mut().zip(x.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        let std = var.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, std }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, rows: &[f64]) -> Array2<f64> {
        let dim = self.dim();
        let mut out = Array2::from_shape_vec((rows.len() / dim, dim), rows.to_vec()).expect("whole rows");
        for mut r in out.rows_mut() {
            for ((v, m), s) in r.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn inverse(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.clone();
        for mut r in out.rows_mut() {
            for ((v, m), s) in r.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }
}
