//! Fully connected network with manual backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layers `sizes[0] -> sizes[1] -> ... -> sizes[L]`. Hidden layers use
/// `activation`; the output layer is linear. Weights are row-major
/// `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().flatten().for_each(|g| *g = 0.0);
        self.biases.iter_mut().flatten().for_each(|g| *g = 0.0);
    }

    /// Value for the flat parameter index used by [`Mlp::param`].
    pub fn flat(&self, mut idx: usize) -> f64 {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if idx < w.len() {
                return w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("gradient index out of range")
    }
}

#[inline]
pub(crate) fn affine(weights: &[f64], bias: &[f64], input: &[f64], out: &mut [f64]) {
    let n_in = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &weights[j * n_in..(j + 1) * n_in];
        let mut z = bias[j];
        for (w, x) in row.iter().zip(input) {
            z += w * x;
        }
        *o = z;
    }
}

impl Mlp {
    fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must list at least input and output, all positive: {layer_sizes:?}"
            )));
        }
        Ok(())
    }

    /// Xavier-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            weights.push((0..n_in * n_out).map(|_| rng.random_range(-limit..limit)).collect());
            biases.push(vec![0.0; n_out]);
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
            biases,
        })
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights: layer_sizes.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub(crate) fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        (&self.weights[l], &self.biases[l])
    }

    pub(crate) fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    fn param_slot(&mut self, mut idx: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if idx < w.len() {
                return &mut w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return &mut b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range")
    }

    /// Flat parameter order: layer by layer, weights then biases.
    pub fn param(&mut self, idx: usize) -> f64 {
        *self.param_slot(idx)
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        *self.param_slot(idx) = value;
    }

    pub fn params_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    /// Apply hidden layers `from..` and the linear output layer to `hidden`,
    /// which holds the activated output of layer `from - 1` (or the input when
    /// `from == 0`).
    pub(crate) fn forward_from(&self, from: usize, hidden: &[f64]) -> Vec<f64> {
        let mut current = hidden.to_vec();
        let last = self.n_layers() - 1;
        for l in from..self.n_layers() {
            let mut next = vec![0.0; self.layer_sizes[l + 1]];
            affine(&self.weights[l], &self.biases[l], &current, &mut next);
            if l < last {
                next.iter_mut().for_each(|z| *z = self.activation.apply(*z));
            }
            current = next;
        }
        current
    }

    pub(crate) fn activate(&self, z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        Ok(self.forward_from(0, input))
    }

    /// Activations of every layer, input first.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(input.to_vec());
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let mut next = vec![0.0; self.layer_sizes[l + 1]];
            affine(&self.weights[l], &self.biases[l], &acts[l], &mut next);
            if l < last {
                self.activate(&mut next);
            }
            acts.push(next);
        }
        acts
    }

    /// Mean squared error over outputs whose target is finite; NaN targets are
    /// skipped.
    pub fn loss(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        let out = self.forward(input)?;
        Ok(masked_mse(&out, target).0)
    }

    /// Accumulate the gradient of [`Mlp::loss`] into `grads`; returns the loss.
    pub fn accumulate_gradient(&self, input: &[f64], target: &[f64], grads: &mut Gradients) -> Result<f64> {
        if input.len() != self.input_dim() || target.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "sample has {} inputs / {} targets, network is {}→{}",
                input.len(),
                target.len(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        let acts = self.trace(input);
        let out = &acts[self.n_layers()];
        let (loss, count) = masked_mse(out, target);
        if count == 0 {
            return Ok(0.0);
        }
        let scale = 2.0 / count as f64;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(o, t)| if t.is_finite() { scale * (o - t) } else { 0.0 })
            .collect();
        for l in (0..self.n_layers()).rev() {
            let a_prev = &acts[l];
            let n_in = a_prev.len();
            let gw = &mut grads.weights[l];
            for (j, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_prev) {
                    *g += d * a;
                }
            }
            for (g, d) in grads.biases[l].iter_mut().zip(&delta) {
                *g += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for (j, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &w[j * n_in..(j + 1) * n_in];
                for (p, wv) in prev.iter_mut().zip(row) {
                    *p += wv * d;
                }
            }
            for (p, a) in prev.iter_mut().zip(a_prev) {
                *p *= self.activation.derivative_from_output(*a);
            }
            delta = prev;
        }
        Ok(loss)
    }

    pub fn gradient(&self, input: &[f64], target: &[f64]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_gradient(input, target, &mut grads)?;
        Ok((loss, grads))
    }

    pub(crate) fn new_gradients(&self) -> Gradients {
        Gradients::zeros_like(self)
    }

    /// `p -= lr * (g / batch + l2 * p)` for weights; biases are not decayed.
    pub(crate) fn sgd_step(&mut self, grads: &mut Gradients, batch: usize, lr: f64, l2: f64) {
        let inv = 1.0 / batch as f64;
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (p, gv) in w.iter_mut().zip(g) {
                *p -= lr * (gv * inv + l2 * *p);
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (p, gv) in b.iter_mut().zip(g) {
                *p -= lr * gv * inv;
            }
        }
        grads.clear();
    }

    /// One Adam update with bias correction; `l2` decays weights as in [`Mlp::sgd_step`].
    pub(crate) fn adam_step(&mut self, grads: &mut Gradients, batch: usize, lr: f64, l2: f64, state: &mut AdamState) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        state.t += 1;
        let c1 = 1.0 - B1.powi(state.t as i32);
        let c2 = 1.0 - B2.powi(state.t as i32);
        let inv = 1.0 / batch as f64;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        };
        for (l, w) in self.weights.iter_mut().enumerate() {
            for (i, p) in w.iter_mut().enumerate() {
                let g = grads.weights[l][i] * inv + l2 * *p;
                update(p, g, &mut state.m.weights[l][i], &mut state.v.weights[l][i]);
            }
        }
        for (l, b) in self.biases.iter_mut().enumerate() {
            for (i, p) in b.iter_mut().enumerate() {
                let g = grads.biases[l][i] * inv;
                update(p, g, &mut state.m.biases[l][i], &mut state.v.biases[l][i]);
            }
        }
        grads.clear();
    }
}

/// First and second moment estimates for [`Mlp::adam_step`].
#[derive(Debug, Clone)]
pub(crate) struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    pub(crate) fn new(mlp: &Mlp) -> Self {
        AdamState { m: Gradients::zeros_like(mlp), v: Gradients::zeros_like(mlp), t: 0 }
    }
}

pub(crate) fn masked_mse(out: &[f64], target: &[f64]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for (o, t) in out.iter().zip(target) {
        if t.is_finite() {
            sum += (o - t) * (o - t);
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}

/// Largest relative error between backprop and central finite differences
/// over a seeded random subset of at least `min_params` parameters (all of
/// them when the network is smaller). Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(
    mlp: &Mlp,
    input: &[f64],
    target: &[f64],
    epsilon: f64,
    min_params: usize,
    seed: u64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference epsilon must be in [1e-7, 1e-3], got {epsilon}"
        )));
    }
    let (_, grads) = mlp.gradient(input, target)?;
    let total = mlp.n_params();
    let mut indices: Vec<usize> = (0..total).collect();
    if total > min_params {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(indices.as_mut_slice(), &mut rng);
        indices.truncate(min_params);
    }
    let mut probe = mlp.clone();
    let mut worst: f64 = 0.0;
    for idx in indices {
        let original = probe.param(idx);
        probe.set_param(idx, original + epsilon);
        let plus = probe.loss(input, target)?;
        probe.set_param(idx, original - epsilon);
        let minus = probe.loss(input, target)?;
        probe.set_param(idx, original);
        let numeric = (plus - minus) / (2.0 * epsilon);
        let analytic = grads.flat(idx);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[6, 4, 3], Activation::Tanh).unwrap();
        assert_eq!(net.forward(&random_vec(6, 1)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn small_net_gradient_check() {
        let net = Mlp::new(&[16, 8, 4], Activation::Tanh, 3).unwrap();
        let err = gradient_check(&net, &random_vec(16, 4), &random_vec(4, 5), 1e-5, 50, 9).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn single_layer_linear_matches_closed_form() {
        // L = (1/m) Σ (Wx + b - y)²  ⇒  dL/dW = (2/m) (Wx + b - y) xᵀ
        let (n_in, n_out) = (5, 3);
        let net = Mlp::new(&[n_in, n_out], Activation::Identity, 2).unwrap();
        let x = random_vec(n_in, 6);
        let y = random_vec(n_out, 7);
        let (_, g) = net.gradient(&x, &y).unwrap();
        let (w, b) = net.layer(0);
        for j in 0..n_out {
            let pred: f64 = b[j] + (0..n_in).map(|i| w[j * n_in + i] * x[i]).sum::<f64>();
            let r = 2.0 / n_out as f64 * (pred - y[j]);
            assert!((g.biases[0][j] - r).abs() < 1e-12);
            for i in 0..n_in {
                assert!((g.weights[0][j * n_in + i] - r * x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_out_of_range_rejected() {
        let net = Mlp::new(&[2, 2], Activation::Tanh, 0).unwrap();
        assert!(gradient_check(&net, &[0.0, 0.0], &[0.0, 0.0], 1e-2, 10, 0).is_err());
        assert!(gradient_check(&net, &[0.0, 0.0], &[0.0, 0.0], 1e-9, 10, 0).is_err());
    }

    #[test]
    fn nan_targets_are_skipped() {
        let net = Mlp::new(&[3, 2], Activation::Identity, 1).unwrap();
        let x = [0.5, -0.2, 0.1];
        let (l_full, _) = net.gradient(&x, &[0.3, f64::NAN]).unwrap();
        let out = net.forward(&x).unwrap();
        assert!((l_full - (out[0] - 0.3).powi(2)).abs() < 1e-15);
    }
}
