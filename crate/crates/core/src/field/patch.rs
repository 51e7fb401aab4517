use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FieldRaster, Site, YieldRaster};
use crate::error::{Error, Result};

pub const PATCH_SIZE: usize = 5;
pub const PATCH_HALF: usize = PATCH_SIZE / 2;

/// A 5×5×n covariate cube cut from a field. `cube` is row-major with channels
/// innermost: `cube[(i * 5 + j) * n + s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    /// Top-left cell.
    pub origin: Site,
    pub n_features: usize,
    pub cube: Vec<f64>,
    /// 5×5 yield values when labeled; NaN marks masked cells.
    pub target: Option<Vec<f64>>,
}

impl Patch {
    pub fn center(&self) -> Site {
        (self.origin.0 + PATCH_HALF, self.origin.1 + PATCH_HALF)
    }

    /// Position of `site` inside this patch as a flat cell index, if covered.
    pub fn cell_index_of(&self, site: Site) -> Option<usize> {
        let (r, c) = site;
        let (r0, c0) = self.origin;
        if r >= r0 && r < r0 + PATCH_SIZE && c >= c0 && c < c0 + PATCH_SIZE {
            Some((r - r0) * PATCH_SIZE + (c - c0))
        } else {
            None
        }
    }

    pub fn value(&self, i: usize, j: usize, channel: usize) -> f64 {
        self.cube[(i * PATCH_SIZE + j) * self.n_features + channel]
    }

    /// Overwrite one channel in all 25 cells.
    pub fn fill_channel(&mut self, channel: usize, value: f64) {
        for cell in self.cube.chunks_exact_mut(self.n_features) {
            cell[channel] = value;
        }
    }
}

fn is_patch_center(field: &FieldRaster, row: usize, col: usize) -> bool {
    row >= PATCH_HALF
        && col >= PATCH_HALF
        && row + PATCH_HALF < field.height()
        && col + PATCH_HALF < field.width()
        && field.is_valid(row, col)
}

/// Valid patch centers in row-major order: masked-in, with the full 5×5
/// extent inside the raster.
pub fn patch_centers(field: &FieldRaster) -> Vec<Site> {
    field
        .valid_sites()
        .filter(|&(r, c)| is_patch_center(field, r, c))
        .collect()
}

/// Unlabeled patch centered at `center`.
pub fn patch_at(field: &FieldRaster, center: Site) -> Result<Patch> {
    let (r, c) = center;
    if !is_patch_center(field, r, c) {
        return Err(Error::InvalidArgument(format!(
            "({r}, {c}) is not a valid patch center"
        )));
    }
    let n = field.n_features();
    let origin = (r - PATCH_HALF, c - PATCH_HALF);
    let mut cube = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE * n);
    for i in 0..PATCH_SIZE {
        for j in 0..PATCH_SIZE {
            let (cr, cc) = (origin.0 + i, origin.1 + j);
            // masked neighbors carry no data; they borrow the center's covariates
            let src = if field.is_valid(cr, cc) { (cr, cc) } else { center };
            cube.extend_from_slice(field.cell(src.0, src.1));
        }
    }
    Ok(Patch {
        origin,
        n_features: n,
        cube,
        target: None,
    })
}

/// One labeled patch per valid center, row-major.
pub fn extract_patches(field: &FieldRaster, yield_raster: &YieldRaster) -> Result<Vec<Patch>> {
    yield_raster.check_pairs_with(field)?;
    if field.height() < PATCH_SIZE || field.width() < PATCH_SIZE {
        return Err(Error::InvalidArgument(format!(
            "field {}×{} is smaller than a {PATCH_SIZE}×{PATCH_SIZE} patch",
            field.height(),
            field.width()
        )));
    }
    patch_centers(field)
        .into_iter()
        .map(|center| {
            let mut patch = patch_at(field, center)?;
            let (r0, c0) = patch.origin;
            let target = (0..PATCH_SIZE)
                .flat_map(|i| (0..PATCH_SIZE).map(move |j| (i, j)))
                .map(|(i, j)| {
                    if yield_raster.mask[(r0 + i) * yield_raster.width + c0 + j] {
                        yield_raster.value(r0 + i, c0 + j)
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            patch.target = Some(target);
            Ok(patch)
        })
        .collect()
}

/// Deterministic shuffled split; the training side gets
/// `round(fraction * len)` patches, clamped so both sides are non-empty.
pub fn split_patches(patches: Vec<Patch>, fraction: f64, seed: u64) -> Result<(Vec<Patch>, Vec<Patch>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    if patches.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 patches to split, got {}",
            patches.len()
        )));
    }
    let n = patches.len();
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<Patch>> = patches.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<Patch> {
        idx.iter().filter_map(|&i| slots[i].take()).collect()
    };
    let train = take(&order[..n_train]);
    let validation = take(&order[n_train..]);
    Ok((train, validation))
}

/// Every valid patch whose 5×5 extent covers `site`, in row-major order of
/// the patch centers. At most 25.
pub fn window9(field: &FieldRaster, site: Site) -> Result<Vec<Patch>> {
    let (row, col) = site;
    if !field.is_valid(row, col) {
        return Err(Error::MaskedSite { row, col });
    }
    let mut out = Vec::new();
    for r in row.saturating_sub(PATCH_HALF)..=row + PATCH_HALF {
        for c in col.saturating_sub(PATCH_HALF)..=col + PATCH_HALF {
            if is_patch_center(field, r, c) {
                out.push(patch_at(field, (r, c))?);
            }
        }
    }
    Ok(out)
}
