//! Patch regressors: the `f(cube) -> 5×5 yield` contract and the reference
//! dense network that implements it.

mod mlp;
mod train;

pub use mlp::{gradient_check, Activation, Gradients, Mlp};
pub use train::{rmse, train, Optimizer, TrainConfig, TrainReport};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldRaster, PATCH_SIZE};

pub const PATCH_CELLS: usize = PATCH_SIZE * PATCH_SIZE;

/// A trained model mapping a 5×5×n covariate cube to a 5×5 yield patch.
///
/// Implementations must be pure: the same cube always yields bitwise the same
/// output. The sweep hooks have default implementations in terms of
/// [`PatchRegressor::predict`]; overrides must return identical values.
pub trait PatchRegressor: Send + Sync {
    fn n_features(&self) -> usize;

    fn patch_size(&self) -> usize {
        PATCH_SIZE
    }

    /// 25 yield values, row-major.
    fn predict(&self, cube: &[f64]) -> Result<Vec<f64>>;

    /// `predict` with channel 0 of every cell set to each value in turn;
    /// returns one 25-cell prediction per value.
    fn predict_nitrogen_sweep(&self, cube: &[f64], n_values: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_cube(cube, self.n_features())?;
        let n = self.n_features();
        let mut work = cube.to_vec();
        n_values
            .iter()
            .map(|&v| {
                for cell in work.chunks_exact_mut(n) {
                    cell[0] = v;
                }
                self.predict(&work)
            })
            .collect()
    }

    /// Same as [`PatchRegressor::predict_nitrogen_sweep`] restricted to one
    /// output cell.
    fn predict_nitrogen_sweep_cell(&self, cube: &[f64], n_values: &[f64], cell: usize) -> Result<Vec<f64>> {
        if cell >= PATCH_CELLS {
            return Err(Error::Shape(format!("cell index {cell} outside a 5×5 patch")));
        }
        Ok(self
            .predict_nitrogen_sweep(cube, n_values)?
            .into_iter()
            .map(|p| p[cell])
            .collect())
    }
}

/// Regressor that applies a fixed function to each cell's covariates
/// independently. Serves as a known ground truth for the downstream stages.
pub struct CellwiseModel<F> {
    n_features: usize,
    f: F,
}

impl<F> CellwiseModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_features: usize, f: F) -> Self {
        CellwiseModel { n_features, f }
    }
}

impl<F> PatchRegressor for CellwiseModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, cube: &[f64]) -> Result<Vec<f64>> {
        check_cube(cube, self.n_features)?;
        Ok(cube.chunks_exact(self.n_features).map(&self.f).collect())
    }
}

pub(crate) fn check_cube(cube: &[f64], n_features: usize) -> Result<()> {
    if cube.len() != PATCH_CELLS * n_features {
        return Err(Error::Shape(format!(
            "cube has {} values, expected 5×5×{} = {}",
            cube.len(),
            n_features,
            PATCH_CELLS * n_features
        )));
    }
    Ok(())
}

#[inline]
fn normalize(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        v - lo
    }
}

#[inline]
fn denormalize(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        v * (hi - lo) + lo
    } else {
        v + lo
    }
}

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];

/// Reference regressor: a dense network over the flattened cube.
///
/// Inputs are min-max scaled per feature and laid out with all passive
/// channels first (cell-major) and the 25 nitrogen values last, so a
/// nitrogen sweep can reuse the passive part of the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    format: String,
    n_features: usize,
    seed: u64,
    /// Per-feature `(min, max)` used for input scaling.
    input_ranges: Vec<(f64, f64)>,
    /// Yield `(min, max)` used for output scaling.
    target_range: (f64, f64),
    mlp: Mlp,
}

const FORMAT: &str = "rzones-dense-v1";

impl DenseNet {
    /// Randomly initialized network with identity scaling.
    pub fn new(n_features: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let sizes = Self::sizes(n_features, hidden);
        Ok(Self::from_mlp(n_features, Mlp::new(&sizes, activation, seed)?, seed))
    }

    /// All weights and biases zero.
    pub fn zeros(n_features: usize, hidden: &[usize], activation: Activation) -> Result<Self> {
        let sizes = Self::sizes(n_features, hidden);
        Ok(Self::from_mlp(n_features, Mlp::zeros(&sizes, activation)?, 0))
    }

    fn sizes(n_features: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![PATCH_CELLS * n_features];
        sizes.extend_from_slice(hidden);
        sizes.push(PATCH_CELLS);
        sizes
    }

    fn from_mlp(n_features: usize, mlp: Mlp, seed: u64) -> Self {
        DenseNet {
            format: FORMAT.to_string(),
            n_features,
            seed,
            input_ranges: vec![(0.0, 1.0); n_features],
            target_range: (0.0, 1.0),
            mlp,
        }
    }

    /// Scale inputs by the field's feature ranges.
    pub fn with_input_ranges(mut self, ranges: &[(f64, f64)]) -> Result<Self> {
        if ranges.len() != self.n_features {
            return Err(Error::Shape(format!(
                "{} input ranges for {} features",
                ranges.len(),
                self.n_features
            )));
        }
        self.input_ranges = ranges.to_vec();
        Ok(self)
    }

    pub fn with_target_range(mut self, range: (f64, f64)) -> Self {
        self.target_range = range;
        self
    }

    /// Network sized and scaled for `field`, with outputs scaled to `yield_range`.
    pub fn for_field(
        field: &FieldRaster,
        yield_range: (f64, f64),
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self::new(field.n_features(), hidden, activation, seed)?
            .with_input_ranges(field.feature_ranges())?
            .with_target_range(yield_range))
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub(crate) fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.mlp.layer_sizes()
    }

    pub fn input_ranges(&self) -> &[(f64, f64)] {
        &self.input_ranges
    }

    pub fn target_range(&self) -> (f64, f64) {
        self.target_range
    }

    fn n_passive_inputs(&self) -> usize {
        PATCH_CELLS * (self.n_features - 1)
    }

    /// Scaled network input for a cube.
    pub fn encode(&self, cube: &[f64]) -> Result<Vec<f64>> {
        check_cube(cube, self.n_features)?;
        let n = self.n_features;
        let mut x = Vec::with_capacity(cube.len());
        for cell in cube.chunks_exact(n) {
            for s in 1..n {
                x.push(normalize(cell[s], self.input_ranges[s]));
            }
        }
        for cell in cube.chunks_exact(n) {
            x.push(normalize(cell[0], self.input_ranges[0]));
        }
        Ok(x)
    }

    /// Scaled training target; non-finite values stay non-finite.
    pub fn encode_target(&self, target: &[f64]) -> Vec<f64> {
        target.iter().map(|&y| normalize(y, self.target_range)).collect()
    }

    fn decode(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|y| *y = denormalize(*y, self.target_range));
    }

    /// Finite-difference check of the squared-error gradient on one sample.
    pub fn gradient_check(&self, cube: &[f64], target: &[f64], epsilon: f64) -> Result<f64> {
        let x = self.encode(cube)?;
        gradient_check(&self.mlp, &x, &self.encode_target(target), epsilon, 50, self.seed)
    }

    /// Shared sweep path. `only` restricts the output layer to one cell.
    fn sweep(&self, cube: &[f64], n_values: &[f64], only: Option<usize>) -> Result<Vec<Vec<f64>>> {
        let x = self.encode(cube)?;
        let n_in = x.len();
        let split = self.n_passive_inputs();
        let (w, b) = self.mlp.layer(0);
        let n_first = b.len();
        let mut partial = vec![0.0; n_first];
        for (j, p) in partial.iter_mut().enumerate() {
            let row = &w[j * n_in..j * n_in + split];
            let mut z = b[j];
            for (wv, xv) in row.iter().zip(&x[..split]) {
                z += wv * xv;
            }
            *p = z;
        }
        let single_layer = self.mlp.n_layers() == 1;
        let mut out = Vec::with_capacity(n_values.len());
        for &v in n_values {
            let nv = normalize(v, self.input_ranges[0]);
            let mut z = partial.clone();
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &w[j * n_in + split..(j + 1) * n_in];
                for wv in row {
                    *zj += wv * nv;
                }
            }
            let mut y = if single_layer {
                z
            } else {
                self.mlp.activate(&mut z);
                self.finish(z, only)
            };
            if single_layer {
                if let Some(c) = only {
                    y = vec![y[c]];
                }
            }
            self.decode(&mut y);
            out.push(y);
        }
        Ok(out)
    }

    /// Layers 1.. applied to the first hidden activation.
    fn finish(&self, hidden: Vec<f64>, only: Option<usize>) -> Vec<f64> {
        let last = self.mlp.n_layers() - 1;
        let mut current = hidden;
        for l in 1..self.mlp.n_layers() {
            let (w, b) = self.mlp.layer(l);
            let n_in = current.len();
            if l == last {
                if let Some(c) = only {
                    let row = &w[c * n_in..(c + 1) * n_in];
                    let mut z = b[c];
                    for (wv, xv) in row.iter().zip(&current) {
                        z += wv * xv;
                    }
                    return vec![z];
                }
            }
            let mut next = vec![0.0; b.len()];
            mlp::affine(w, b, &current, &mut next);
            if l < last {
                self.mlp.activate(&mut next);
            }
            current = next;
        }
        current
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: DenseNet = serde_json::from_str(&text)?;
        if net.format != FORMAT {
            return Err(Error::InvalidArgument(format!("unknown model format `{}`", net.format)));
        }
        let expected = Self::sizes(net.n_features, &net.mlp.layer_sizes()[1..net.mlp.layer_sizes().len() - 1]);
        if net.mlp.layer_sizes() != expected.as_slice() || net.input_ranges.len() != net.n_features {
            return Err(Error::Shape("model layer sizes do not match its feature count".into()));
        }
        Ok(net)
    }
}

impl PatchRegressor for DenseNet {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, cube: &[f64]) -> Result<Vec<f64>> {
        let x = self.encode(cube)?;
        let mut y = self.mlp.forward(&x)?;
        self.decode(&mut y);
        Ok(y)
    }

    fn predict_nitrogen_sweep(&self, cube: &[f64], n_values: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.sweep(cube, n_values, None)
    }

    fn predict_nitrogen_sweep_cell(&self, cube: &[f64], n_values: &[f64], cell: usize) -> Result<Vec<f64>> {
        if cell >= PATCH_CELLS {
            return Err(Error::Shape(format!("cell index {cell} outside a 5×5 patch")));
        }
        Ok(self
            .sweep(cube, n_values, Some(cell))?
            .into_iter()
            .map(|y| y[0])
            .collect())
    }
}
