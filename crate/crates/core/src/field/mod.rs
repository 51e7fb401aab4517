//! Raster field model: covariate channels on a regular grid with a validity
//! mask, plus the 5×5 patch views the surrogate consumes.

mod io;
mod patch;
mod synthetic;

pub use io::{load_field, load_yield, parse_field, parse_yield, write_field, write_yield, SENTINEL};
pub use patch::{
    extract_patches, patch_at, patch_centers, split_patches, window9, Patch, PATCH_HALF, PATCH_SIZE,
};
pub use synthetic::{generate_synthetic, SyntheticField, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel names in the canonical covariate order. Channel 0 is always nitrogen.
pub const DEFAULT_FEATURE_NAMES: [&str; 8] = ["N", "S", "E", "TPI", "A", "P", "VV", "VH"];

/// Grid cell coordinate as `(row, col)`.
pub type Site = (usize, usize);

/// Covariate raster. Values are stored row-major with channels innermost:
/// `data[(row * width + col) * n_features + channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRaster {
    height: usize,
    width: usize,
    n_features: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
    feature_names: Vec<String>,
    feature_ranges: Vec<(f64, f64)>,
    cell_size_m: f64,
}

impl FieldRaster {
    pub fn new(
        height: usize,
        width: usize,
        feature_names: Vec<String>,
        data: Vec<f64>,
        mask: Vec<bool>,
        cell_size_m: f64,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("zero-area field".into()));
        }
        if n_features < 2 {
            return Err(Error::InvalidArgument(format!(
                "a field needs nitrogen plus at least one passive feature, got {n_features} channel(s)"
            )));
        }
        if data.len() != height * width * n_features {
            return Err(Error::Shape(format!(
                "data has {} values, expected {}×{}×{}",
                data.len(),
                height,
                width,
                n_features
            )));
        }
        if mask.len() != height * width {
            return Err(Error::Shape(format!(
                "mask has {} cells, expected {}",
                mask.len(),
                height * width
            )));
        }
        let mut field = FieldRaster {
            height,
            width,
            n_features,
            data,
            mask,
            feature_names,
            feature_ranges: Vec::new(),
            cell_size_m,
        };
        field.recompute_ranges()?;
        Ok(field)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// `(min, max)` of each channel over masked-in cells.
    pub fn feature_ranges(&self) -> &[(f64, f64)] {
        &self.feature_ranges
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width && self.mask[row * self.width + col]
    }

    /// All channels of one cell.
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.n_features;
        &self.data[start..start + self.n_features]
    }

    pub fn value(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.n_features + channel]
    }

    /// Masked-in cells in row-major order.
    pub fn valid_sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.height)
            .flat_map(move |r| (0..self.width).map(move |c| (r, c)))
            .filter(move |&(r, c)| self.mask[r * self.width + c])
    }

    pub fn n_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn recompute_ranges(&mut self) -> Result<()> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n_features];
        for (cell, _) in self.mask.iter().enumerate().filter(|(_, &m)| m) {
            let values = &self.data[cell * self.n_features..(cell + 1) * self.n_features];
            for (range, &v) in ranges.iter_mut().zip(values) {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite value at cell ({}, {})",
                        cell / self.width,
                        cell % self.width
                    )));
                }
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        if ranges[0].0 > ranges[0].1 {
            return Err(Error::InvalidArgument("field has no masked-in cells".into()));
        }
        self.feature_ranges = ranges;
        Ok(())
    }
}

/// Observed yield (bu/ac) on the same grid as a [`FieldRaster`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldRaster {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl YieldRaster {
    pub fn new(height: usize, width: usize, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != height * width || mask.len() != height * width {
            return Err(Error::Shape(format!(
                "yield raster expects {} cells, got {} values and {} mask entries",
                height * width,
                values.len(),
                mask.len()
            )));
        }
        Ok(YieldRaster {
            height,
            width,
            values,
            mask,
        })
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// `(min, max)` over masked-in cells.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            })
    }

    pub(crate) fn check_pairs_with(&self, field: &FieldRaster) -> Result<()> {
        if self.height != field.height || self.width != field.width {
            return Err(Error::Shape(format!(
                "yield raster is {}×{} but field is {}×{}",
                self.height, self.width, field.height, field.width
            )));
        }
        if self.mask != field.mask {
            return Err(Error::Shape("yield and field masks differ".into()));
        }
        Ok(())
    }
}
