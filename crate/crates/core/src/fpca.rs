//! Functional PCA on uniformly sampled curves.
//!
//! Curves live on an even nitrogen grid, so the functional inner product is
//! the plain dot product over samples and fPCA reduces to PCA of the sample
//! covariance. Curve shape distance is Euclidean distance between score
//! vectors.

use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Site;
use crate::response::ResponseCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpcaSettings {
    /// Smallest cumulative explained-variance ratio to reach.
    pub variance_target: f64,
    /// Upper bound on the component count.
    pub k_max: usize,
}

impl Default for FpcaSettings {
    fn default() -> Self {
        FpcaSettings {
            variance_target: 0.995,
            k_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaModel {
    pub mean_curve: Vec<f64>,
    /// `k` orthonormal eigen-curves, strongest first.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Full eigenvalue spectrum of the covariance, descending.
    pub spectrum: Vec<f64>,
    pub total_variance: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub site: Site,
    pub scores: Vec<f64>,
}

/// Eigen-decomposition of a dense symmetric matrix (row-major `n × n`) by
/// cyclic Jacobi rotations. Returns eigenvalues in descending order and the
/// matching unit eigenvectors; each vector's largest-magnitude entry is made
/// positive.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if matrix.len() != n * n {
        return Err(Error::Shape(format!("expected {}×{} matrix, got {} values", n, n, matrix.len())));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (1e-15 * frob).powi(2);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let g = a[k * n + p];
                    let h = a[k * n + q];
                    a[k * n + p] = c * g - s * h;
                    a[k * n + q] = s * g + c * h;
                }
                for k in 0..n {
                    let g = a[p * n + k];
                    let h = a[q * n + k];
                    a[p * n + k] = c * g - s * h;
                    a[q * n + k] = s * g + c * h;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let g = v[k * n + p];
                    let h = v[k * n + q];
                    v[k * n + p] = c * g - s * h;
                    v[k * n + q] = s * g + c * h;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
            let mut pivot = 0;
            for (k, x) in vec.iter().enumerate() {
                if x.abs() > vec[pivot].abs() {
                    pivot = k;
                }
            }
            if vec[pivot] < 0.0 {
                vec.iter_mut().for_each(|x| *x = -*x);
            }
            vec
        })
        .collect();
    Ok((values, vectors))
}

/// Sample covariance (1/(m−1)) of equal-length curves about their mean.
pub fn covariance(curves: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let m = curves.len();
    let n = curves[0].len();
    let mut mean = vec![0.0; n];
    for c in curves {
        for (mu, v) in mean.iter_mut().zip(c.iter()) {
            *mu += v;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= m as f64);
    let mut cov = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for c in curves {
        for ((x, v), mu) in centered.iter_mut().zip(c.iter()).zip(&mean) {
            *x = v - mu;
        }
        for i in 0..n {
            let xi = centered[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut cov[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += xi * centered[j];
            }
        }
    }
    let denom = (m - 1) as f64;
    for i in 0..n {
        for j in i..n {
            let val = cov[i * n + j] / denom;
            cov[i * n + j] = val;
            cov[j * n + i] = val;
        }
    }
    (mean, cov)
}

impl FpcaModel {
    /// Fit on a set of equal-length aligned curves.
    pub fn fit(curves: &[&[f64]], settings: &FpcaSettings) -> Result<Self> {
        if curves.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "fPCA needs at least 2 curves, got {}",
                curves.len()
            )));
        }
        let steps = curves[0].len();
        if steps == 0 || curves.iter().any(|c| c.len() != steps) {
            return Err(Error::Shape("all curves must have the same non-zero length".into()));
        }
        if curves.iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("curves contain non-finite values".into()));
        }
        if !(settings.variance_target > 0.0 && settings.variance_target <= 1.0) || settings.k_max == 0 {
            return Err(Error::InvalidArgument(
                "variance_target must be in (0, 1] and k_max at least 1".into(),
            ));
        }
        let (mean_curve, cov) = covariance(curves);
        let total_variance: f64 = (0..steps).map(|i| cov[i * steps + i]).sum();
        let scale = mean_curve.iter().map(|v| v * v).sum::<f64>() / steps as f64;
        if !(total_variance > 1e-20 * scale.max(1.0)) {
            return Err(Error::DegenerateCurves(
                "all curves are identical, the covariance is zero".into(),
            ));
        }
        let (spectrum, vectors) = symmetric_eigen(&cov, steps)?;
        let spectrum: Vec<f64> = spectrum.into_iter().map(|l| l.max(0.0)).collect();
        let denom: f64 = spectrum.iter().sum();

        let mut cumulative = 0.0;
        let mut k_rule = steps;
        for (i, l) in spectrum.iter().enumerate() {
            cumulative += l / denom;
            if cumulative >= settings.variance_target - 1e-12 {
                k_rule = i + 1;
                break;
            }
        }
        let k_cap = settings.k_max.min(steps);
        let k = if k_rule > k_cap {
            warn!(
                target: "fpca",
                "variance_target={} needs k={k_rule} but k_max={k_cap}; using the cap",
                settings.variance_target
            );
            k_cap
        } else {
            k_rule
        };
        let eigenvalues = spectrum[..k].to_vec();
        let explained_ratio = eigenvalues.iter().map(|l| l / denom).collect();
        Ok(FpcaModel {
            mean_curve,
            components: vectors.into_iter().take(k).collect(),
            eigenvalues,
            explained_ratio,
            spectrum,
            total_variance,
            k,
        })
    }

    pub fn fit_curves(curves: &[ResponseCurve], settings: &FpcaSettings) -> Result<Self> {
        if let Some(c) = curves.iter().find(|c| !c.aligned) {
            return Err(Error::InvalidArgument(format!("curve at {:?} is not aligned", c.site)));
        }
        let values: Vec<&[f64]> = curves.iter().map(|c| c.values.as_slice()).collect();
        Self::fit(&values, settings)
    }

    pub fn steps(&self) -> usize {
        self.mean_curve.len()
    }

    fn check_len(&self, curve: &[f64]) -> Result<()> {
        if curve.len() != self.steps() {
            return Err(Error::Shape(format!(
                "curve has {} samples, model expects {}",
                curve.len(),
                self.steps()
            )));
        }
        Ok(())
    }

    /// Projections onto the components.
    pub fn transform(&self, curve: &[f64]) -> Result<Vec<f64>> {
        self.check_len(curve)?;
        Ok(self
            .components
            .iter()
            .map(|phi| {
                curve
                    .iter()
                    .zip(&self.mean_curve)
                    .zip(phi)
                    .map(|((x, mu), p)| (x - mu) * p)
                    .sum()
            })
            .collect())
    }

    pub fn transform_curve(&self, curve: &ResponseCurve) -> Result<ScoreVector> {
        Ok(ScoreVector {
            site: curve.site,
            scores: self.transform(&curve.values)?,
        })
    }

    /// Shape distance between two curves: Euclidean distance of their scores.
    pub fn distance(&self, r1: &[f64], r2: &[f64]) -> Result<f64> {
        let a = self.transform(r1)?;
        let b = self.transform(r2)?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.k {
            return Err(Error::Shape(format!("{} scores for a {}-component model", scores.len(), self.k)));
        }
        let mut out = self.mean_curve.clone();
        for (s, phi) in scores.iter().zip(&self.components) {
            for (o, p) in out.iter_mut().zip(phi) {
                *o += s * p;
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: FpcaModel = serde_json::from_str(&text)?;
        if model.components.len() != model.k || model.components.iter().any(|c| c.len() != model.mean_curve.len()) {
            return Err(Error::Shape("fPCA model components inconsistent with k / curve length".into()));
        }
        Ok(model)
    }
}
