//! Online feedforward network for binary labels.
//!
//! Rectifier hidden layers, a single logistic output unit and plain SGD on
//! the logistic loss. Inputs are standardized with running per-feature
//! statistics so raw stream coordinates of any scale can be fed directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Gradient L2 norm cap per step.
    pub clip_norm: f64,
    /// Start the output layer at zero so untrained networks predict 0.5.
    pub zero_output_init: bool,
    pub standardize: bool,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            learning_rate: 0.01,
            clip_norm: 5.0,
            zero_output_init: true,
            standardize: true,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::config("mlp.hidden", "layer sizes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("mlp.learning_rate", "must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("mlp.clip_norm", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out x n_in`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.b[o];
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RunningScaler {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningScaler {
    fn update(&mut self, x: &[f64]) {
        if self.mean.is_empty() {
            self.mean = vec![0.0; x.len()];
            self.m2 = vec![0.0; x.len()];
        }
        self.n += 1.0;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        if self.mean.is_empty() {
            return x.to_vec();
        }
        if self.n < 2.0 {
            return x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        }
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let var = self.m2[i] / (self.n - 1.0);
                let sd = if var > 1e-12 { var.sqrt() } else { 1.0 };
                (v - self.mean[i]) / sd
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    params: MlpParams,
    dim: usize,
    layers: Vec<Layer>,
    scaler: RunningScaler,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// He-uniform hidden weights drawn from `rng`; zero biases.
    pub fn new(params: MlpParams, dim: usize, rng: &mut RngState) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::param("mlp input dimension must be positive"));
        }
        let mut sizes = vec![dim];
        sizes.extend(&params.hidden);
        sizes.push(1);
        let n_layers = sizes.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (n_in, n_out) = (sizes[l], sizes[l + 1]);
                let is_output = l + 1 == n_layers;
                let w = if is_output && params.zero_output_init {
                    vec![0.0; n_in * n_out]
                } else {
                    let limit = if is_output {
                        (6.0 / (n_in + n_out) as f64).sqrt()
                    } else {
                        (6.0 / n_in as f64).sqrt()
                    };
                    (0..n_in * n_out)
                        .map(|_| rng.uniform_range(-limit, limit))
                        .collect()
                };
                Layer {
                    n_in,
                    n_out,
                    w,
                    b: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(Self {
            params,
            dim,
            layers,
            scaler: RunningScaler::default(),
        })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::param(format!(
                "feature dimension {} does not match network input {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("non-finite input to mlp"));
        }
        Ok(())
    }

    fn prepare(&self, x: &[f64]) -> Vec<f64> {
        if self.params.standardize {
            self.scaler.transform(x)
        } else {
            x.to_vec()
        }
    }

    /// Pre-activations and activations of each layer for a prepared input.
    fn forward_trace(&self, input: Vec<f64>) -> (Vec<Vec<f64>>, f64) {
        let mut acts = vec![input];
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(acts.last().expect("input present"), &mut z);
            if l == last {
                return (acts, z[0]);
            }
            acts.push(z.iter().map(|v| v.max(0.0)).collect());
        }
        unreachable!("network has an output layer")
    }

    /// Probability of class 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut cur = self.prepare(x);
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if l == last {
                return Ok(sigmoid(next[0]));
            }
            for v in next.iter_mut() {
                *v = v.max(0.0);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        unreachable!("network has an output layer")
    }

    /// Label 1 iff the probability exceeds 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<(u8, f64)> {
        let p = self.predict_proba(x)?;
        Ok(((p > 0.5) as u8, p))
    }

    /// Logistic loss and its gradient for one prepared input, accumulated
    /// into `grad` (flat layout matching [`Mlp::parameters`]).
    fn accumulate_gradient(&self, input: Vec<f64>, y: u8, grad: &mut [f64]) -> f64 {
        let (acts, logit) = self.forward_trace(input);
        let p = sigmoid(logit);
        let loss = if y == 1 {
            softplus(-logit)
        } else {
            softplus(logit)
        };
        let mut delta = vec![p - y as f64];
        let offsets = self.offsets();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a_in = &acts[l];
            let off = offsets[l];
            for o in 0..layer.n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for i in 0..layer.n_in {
                    grad[off + o * layer.n_in + i] += d * a_in[i];
                }
                grad[off + layer.n_in * layer.n_out + o] += d;
            }
            if l > 0 {
                let mut next = vec![0.0; layer.n_in];
                for (i, slot) in next.iter_mut().enumerate() {
                    if a_in[i] <= 0.0 {
                        continue;
                    }
                    *slot = (0..layer.n_out)
                        .map(|o| delta[o] * layer.w[o * layer.n_in + i])
                        .sum();
                }
                delta = next;
            }
        }
        loss
    }

    fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offs.push(acc);
            acc += layer.w.len() + layer.b.len();
        }
        offs
    }

    /// All weights and biases, layer by layer (weights then biases).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameters().len() {
            return Err(Error::param("parameter vector has wrong length"));
        }
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Summed logistic loss and its exact gradient over a batch, evaluated
    /// with the current input scaling and without clipping.
    pub fn loss_and_gradient(&self, batch: &[(Vec<f64>, u8)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.parameters().len()];
        let mut loss = 0.0;
        for (x, y) in batch {
            self.check_input(x)?;
            loss += self.accumulate_gradient(self.prepare(x), *y, &mut grad);
        }
        Ok((loss, grad))
    }

    /// Activations feeding each layer plus the output delta and the
    /// back-propagated deltas of every layer, last layer first.
    fn backward(&self, input: Vec<f64>, y: u8) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (acts, logit) = self.forward_trace(input);
        let mut deltas = Vec::with_capacity(self.layers.len());
        let mut delta = vec![sigmoid(logit) - y as f64];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if l > 0 {
                let a_in = &acts[l];
                let mut next = vec![0.0; layer.n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                    for ((slot, &w), &a) in next.iter_mut().zip(row).zip(a_in) {
                        if a > 0.0 {
                            *slot += d * w;
                        }
                    }
                }
                deltas.push(std::mem::replace(&mut delta, next));
            } else {
                deltas.push(std::mem::take(&mut delta));
            }
        }
        deltas.reverse();
        (acts, deltas)
    }

    /// One clipped SGD step per unit of `repeats`.
    pub fn learn_one(&mut self, x: &[f64], y: u8, repeats: u32) -> Result<()> {
        if y > 1 {
            return Err(Error::param(format!("label must be 0 or 1, got {y}")));
        }
        self.check_input(x)?;
        if repeats == 0 {
            return Ok(());
        }
        if self.params.standardize {
            self.scaler.update(x);
        }
        let input = self.prepare(x);
        for _ in 0..repeats {
            let (acts, deltas) = self.backward(input.clone(), y);
            // Each layer's gradient is delta ⊗ [a_in, 1].
            let norm = acts
                .iter()
                .zip(&deltas)
                .map(|(a, d)| {
                    let dd: f64 = d.iter().map(|v| v * v).sum();
                    let aa: f64 = a.iter().map(|v| v * v).sum();
                    dd * (aa + 1.0)
                })
                .sum::<f64>()
                .sqrt();
            let scale = if norm > self.params.clip_norm {
                self.params.clip_norm / norm
            } else {
                1.0
            };
            let step = self.params.learning_rate * scale;
            for ((layer, a_in), delta) in self.layers.iter_mut().zip(&acts).zip(&deltas) {
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let g = step * d;
                    let row = &mut layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                    for (w, &a) in row.iter_mut().zip(a_in) {
                        *w -= g * a;
                    }
                    layer.b[o] -= g;
                }
            }
        }
        Ok(())
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}
