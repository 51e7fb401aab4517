//! Synthetic fields with a known responsivity layout.
//!
//! One terrain channel (slope by default) increases across the rows with a
//! gentle wobble; thresholding it gives each cell a latent responsivity class,
//! and yield follows that class's sigmoid in nitrogen. All other passive
//! channels are smooth random surfaces that do not enter the yield.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FieldRaster, YieldRaster, DEFAULT_FEATURE_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub cell_size_m: f64,
    /// Standard deviation of the additive yield noise (bu/ac).
    pub noise_sd: f64,
    /// Channel whose thresholded value decides the latent class.
    pub driver_feature: usize,
    pub driver_min: f64,
    pub driver_max: f64,
    /// Amplitude of the along-column wobble of the driver surface.
    pub driver_wobble: f64,
    /// Ascending cut points on the driver channel; `len + 1` classes.
    pub class_thresholds: Vec<f64>,
    pub base_yield: f64,
    pub plateau: Vec<f64>,
    pub steepness: Vec<f64>,
    pub midpoint: Vec<f64>,
    /// Nitrogen rates are drawn per square plot, uniformly in this range.
    pub n_rate_min: f64,
    pub n_rate_max: f64,
    pub plot_size: usize,
    /// Mask cells outside the inscribed ellipse.
    pub elliptical_boundary: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            height: 60,
            width: 60,
            cell_size_m: 10.0,
            noise_sd: 1.0,
            driver_feature: 1,
            driver_min: 0.0,
            driver_max: 12.0,
            driver_wobble: 0.6,
            class_thresholds: vec![4.0, 8.0],
            base_yield: 40.0,
            plateau: vec![8.0, 28.0, 50.0],
            steepness: vec![0.05, 0.06, 0.07],
            midpoint: vec![30.0, 60.0, 85.0],
            n_rate_min: 0.0,
            n_rate_max: 150.0,
            plot_size: 5,
            elliptical_boundary: false,
        }
    }
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticField {
    pub field: FieldRaster,
    pub yields: YieldRaster,
    /// Latent class per cell, `-1` where masked.
    pub classes: Vec<i32>,
}

impl SyntheticSpec {
    pub fn n_classes(&self) -> usize {
        self.plateau.len()
    }

    /// Latent class for a driver value.
    pub fn class_of(&self, driver: f64) -> usize {
        self.class_thresholds.iter().filter(|&&t| driver >= t).count()
    }

    /// Noiseless yield of `class` at nitrogen rate `n`.
    pub fn class_response(&self, class: usize, n: f64) -> f64 {
        let z = self.steepness[class] * (n - self.midpoint[class]);
        self.base_yield + self.plateau[class] / (1.0 + (-z).exp())
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("zero-area synthetic field".into()));
        }
        let k = self.plateau.len();
        if k == 0 || self.steepness.len() != k || self.midpoint.len() != k {
            return Err(Error::InvalidArgument(
                "plateau, steepness and midpoint must have one entry per class".into(),
            ));
        }
        if self.class_thresholds.len() + 1 != k {
            return Err(Error::InvalidArgument(format!(
                "{} class(es) need {} threshold(s), got {}",
                k,
                k - 1,
                self.class_thresholds.len()
            )));
        }
        if self.class_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("class thresholds must be strictly ascending".into()));
        }
        if self.plateau.iter().chain(&self.steepness).any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "plateau and steepness must be non-negative so curves are nondecreasing".into(),
            ));
        }
        if self.driver_feature == 0 || self.driver_feature >= DEFAULT_FEATURE_NAMES.len() {
            return Err(Error::InvalidArgument(format!(
                "driver feature must be a passive channel in 1..{}",
                DEFAULT_FEATURE_NAMES.len()
            )));
        }
        if !(self.driver_min < self.driver_max) || self.n_rate_min > self.n_rate_max {
            return Err(Error::InvalidArgument("empty driver or nitrogen range".into()));
        }
        if self.plot_size == 0 || !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidArgument("plot_size must be positive and noise_sd non-negative".into()));
        }
        Ok(())
    }
}

/// Value range of each passive channel that is not the driver.
fn passive_range(channel: usize) -> (f64, f64) {
    match channel {
        1 => (0.0, 12.0),
        2 => (900.0, 950.0),
        3 => (-2.0, 2.0),
        4 => (0.0, TAU),
        5 => (300.0, 400.0),
        6 => (-15.0, -8.0),
        _ => (-22.0, -15.0),
    }
}

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
}

fn smooth_surface(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> Vec<f64> {
    let waves: Vec<Wave> = (0..3)
        .map(|_| Wave {
            fx: rng.random_range(0.3..1.5),
            fy: rng.random_range(0.3..1.5),
            phase: rng.random_range(0.0..TAU),
        })
        .collect();
    let jitter = 0.02 * (hi - lo);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let x = c as f64 / w as f64;
            let y = r as f64 / h as f64;
            let s: f64 = waves
                .iter()
                .map(|wv| (TAU * (wv.fx * x + wv.fy * y) + wv.phase).sin())
                .sum::<f64>()
                / waves.len() as f64;
            let v = lo + (hi - lo) * 0.5 * (s + 1.0) + rng.random_range(-jitter..=jitter);
            out.push(v.clamp(lo, hi));
        }
    }
    out
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticField> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let n = DEFAULT_FEATURE_NAMES.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mask: Vec<bool> = (0..h * w)
        .map(|i| {
            if !spec.elliptical_boundary {
                return true;
            }
            let (r, c) = ((i / w) as f64 + 0.5, (i % w) as f64 + 0.5);
            let dy = (r - h as f64 / 2.0) / (h as f64 / 2.0);
            let dx = (c - w as f64 / 2.0) / (w as f64 / 2.0);
            dx * dx + dy * dy <= 1.0
        })
        .collect();

    // driver surface: ramp down the rows plus a wobble along the columns
    let wobble_freq = rng.random_range(0.5..1.5);
    let wobble_phase = rng.random_range(0.0..TAU);
    let driver: Vec<f64> = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let t = if h > 1 { r as f64 / (h - 1) as f64 } else { 0.0 };
            let wob = spec.driver_wobble
                * (TAU * wobble_freq * c as f64 / w as f64 + wobble_phase).sin();
            (spec.driver_min + (spec.driver_max - spec.driver_min) * t + wob)
                .clamp(spec.driver_min, spec.driver_max)
        })
        .collect();

    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(n);
    // nitrogen plots
    let plots_r = h.div_ceil(spec.plot_size);
    let plots_c = w.div_ceil(spec.plot_size);
    let rates: Vec<f64> = (0..plots_r * plots_c)
        .map(|_| {
            if spec.n_rate_max > spec.n_rate_min {
                rng.random_range(spec.n_rate_min..=spec.n_rate_max)
            } else {
                spec.n_rate_min
            }
        })
        .collect();
    channels.push(
        (0..h * w)
            .map(|i| rates[(i / w) / spec.plot_size * plots_c + (i % w) / spec.plot_size])
            .collect(),
    );
    for s in 1..n {
        if s == spec.driver_feature {
            channels.push(driver.clone());
        } else {
            let (lo, hi) = passive_range(s);
            channels.push(smooth_surface(&mut rng, h, w, lo, hi));
        }
    }

    let mut data = vec![0.0; h * w * n];
    for (s, ch) in channels.iter().enumerate() {
        for (i, &v) in ch.iter().enumerate() {
            data[i * n + s] = v;
        }
    }

    let noise = Normal::new(0.0, spec.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut classes = vec![-1; h * w];
    let mut values = vec![0.0; h * w];
    for i in 0..h * w {
        if !mask[i] {
            continue;
        }
        let class = spec.class_of(driver[i]);
        classes[i] = class as i32;
        let eps = if spec.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        values[i] = spec.class_response(class, channels[0][i]) + eps;
    }

    let names = DEFAULT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let field = FieldRaster::new(h, w, names, data, mask.clone(), spec.cell_size_m)?;
    let yields = YieldRaster::new(h, w, values, mask)?;
    Ok(SyntheticField {
        field,
        yields,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_zero_nitrogen_hits_class_baseline() {
        let spec = SyntheticSpec {
            height: 12,
            width: 12,
            noise_sd: 0.0,
            n_rate_min: 0.0,
            n_rate_max: 0.0,
            ..Default::default()
        };
        let out = generate_synthetic(&spec).unwrap();
        for (r, c) in out.field.valid_sites() {
            let class = out.classes[r * 12 + c] as usize;
            let sigmoid_at_zero =
                spec.base_yield + spec.plateau[class] / (1.0 + (spec.steepness[class] * spec.midpoint[class]).exp());
            assert!((out.yields.value(r, c) - sigmoid_at_zero).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_field() {
        let spec = SyntheticSpec {
            height: 20,
            width: 15,
            ..Default::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.yields, b.yields);
        assert_eq!(a.classes, b.classes);
        let c = generate_synthetic(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.field, c.field);
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SyntheticSpec { height: 0, ..Default::default() },
            SyntheticSpec { class_thresholds: vec![4.0], ..Default::default() },
            SyntheticSpec { steepness: vec![0.1, -0.1, 0.1], ..Default::default() },
            SyntheticSpec { driver_feature: 0, ..Default::default() },
        ] {
            assert!(generate_synthetic(&spec).is_err());
        }
    }

    #[test]
    fn class_response_is_monotone() {
        let spec = SyntheticSpec::default();
        for k in 0..spec.n_classes() {
            let ys: Vec<f64> = (0..=150).map(|n| spec.class_response(k, n as f64)).collect();
            assert!(ys.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn ellipse_masks_corners() {
        let spec = SyntheticSpec {
            height: 20,
            width: 20,
            elliptical_boundary: true,
            ..Default::default()
        };
        let out = generate_synthetic(&spec).unwrap();
        assert!(!out.field.is_valid(0, 0));
        assert!(out.field.is_valid(10, 10));
        assert_eq!(out.classes[0], -1);
    }
}
