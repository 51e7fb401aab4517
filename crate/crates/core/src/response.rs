//! Nitrogen response curves: sweep the nitrogen channel through the
//! surrogate, average the overlapping patch predictions for each site, and
//! remove vertical offsets.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{patch_at, patch_centers, window9, FieldRaster, Patch, Site, PATCH_HALF};
use crate::surrogate::{PatchRegressor, PATCH_CELLS};

/// Evenly spaced nitrogen rates (lbs/acre).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NGrid {
    pub n_min: f64,
    pub n_max: f64,
    pub steps: usize,
}

impl Default for NGrid {
    fn default() -> Self {
        NGrid {
            n_min: 0.0,
            n_max: 150.0,
            steps: 151,
        }
    }
}

impl NGrid {
    pub fn new(n_min: f64, n_max: f64, steps: usize) -> Result<Self> {
        let grid = NGrid { n_min, n_max, steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_min < self.n_max) || self.steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "nitrogen grid needs n_min < n_max and at least 2 steps, got [{}, {}] × {}",
                self.n_min, self.n_max, self.steps
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<f64> {
        let span = self.n_max - self.n_min;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|t| {
                if t + 1 == self.steps {
                    self.n_max
                } else {
                    self.n_min + span * t as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub site: Site,
    pub values: Vec<f64>,
    pub aligned: bool,
}

/// Curves of all 25 cells of one patch: `out[cell][t]` is the prediction for
/// `cell` with nitrogen set to grid sample `t` across the whole patch.
pub fn sweep_patch(regressor: &dyn PatchRegressor, cube: &[f64], grid: &NGrid) -> Result<Vec<Vec<f64>>> {
    grid.validate()?;
    let per_step = regressor.predict_nitrogen_sweep(cube, &grid.samples())?;
    let mut out = vec![Vec::with_capacity(grid.steps); PATCH_CELLS];
    for prediction in per_step {
        if prediction.len() != PATCH_CELLS {
            return Err(Error::Shape(format!(
                "regressor returned {} cells, expected {PATCH_CELLS}",
                prediction.len()
            )));
        }
        for (curve, v) in out.iter_mut().zip(prediction) {
            curve.push(v);
        }
    }
    Ok(out)
}

fn accumulate(sum: &mut [f64], curve: &[f64]) {
    for (s, v) in sum.iter_mut().zip(curve) {
        *s += v;
    }
}

fn finish_mean(site: Site, mut sum: Vec<f64>, count: usize) -> Result<ResponseCurve> {
    let k = count as f64;
    for v in &mut sum {
        *v /= k;
    }
    if sum.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite response curve at site {site:?}"
        )));
    }
    Ok(ResponseCurve {
        site,
        values: sum,
        aligned: false,
    })
}

/// Unaligned curve for `site` from an explicit set of patches (the site's
/// window, possibly perturbed). Patches not covering `site` are ignored.
pub fn curve_from_window(
    regressor: &dyn PatchRegressor,
    patches: &[Patch],
    site: Site,
    grid: &NGrid,
) -> Result<ResponseCurve> {
    grid.validate()?;
    let samples = grid.samples();
    let mut sum = vec![0.0; grid.steps];
    let mut count = 0;
    for patch in patches {
        if let Some(cell) = patch.cell_index_of(site) {
            let curve = regressor.predict_nitrogen_sweep_cell(&patch.cube, &samples, cell)?;
            accumulate(&mut sum, &curve);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoValidPatch {
            row: site.0,
            col: site.1,
        });
    }
    finish_mean(site, sum, count)
}

/// Mean curve over every valid patch covering `site`.
pub fn site_curve(regressor: &dyn PatchRegressor, field: &FieldRaster, site: Site, grid: &NGrid) -> Result<ResponseCurve> {
    let window = window9(field, site)?;
    curve_from_window(regressor, &window, site, grid)
}

/// Shift a curve so its minimum is exactly zero.
pub fn align(curve: &ResponseCurve) -> ResponseCurve {
    let min = curve.values.iter().copied().fold(f64::INFINITY, f64::min);
    ResponseCurve {
        site: curve.site,
        values: curve.values.iter().map(|v| v - min).collect(),
        aligned: true,
    }
}

/// Aligned curves for every masked-in site, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub grid: NGrid,
    pub curves: Vec<ResponseCurve>,
    /// Masked-in sites that no valid patch covers.
    pub skipped: Vec<Site>,
}

impl CurveSet {
    pub fn values(&self) -> Vec<&[f64]> {
        self.curves.iter().map(|c| c.values.as_slice()).collect()
    }
}

const CENTER_CHUNK: usize = 64;

/// Aligned curve for every masked-in site covered by at least one valid
/// patch. Each patch is swept once and scattered into the sites it covers,
/// in the same order [`site_curve`] visits them, so both routes agree
/// bit for bit.
pub fn field_curves(regressor: &dyn PatchRegressor, field: &FieldRaster, grid: &NGrid) -> Result<CurveSet> {
    grid.validate()?;
    let (h, w) = (field.height(), field.width());
    let steps = grid.steps;
    let mut sums = vec![0.0; h * w * steps];
    let mut counts = vec![0usize; h * w];
    let centers = patch_centers(field);
    for chunk in centers.chunks(CENTER_CHUNK) {
        let swept = chunk
            .par_iter()
            .map(|&center| {
                let patch = patch_at(field, center)?;
                sweep_patch(regressor, &patch.cube, grid).map(|curves| (patch.origin, curves))
            })
            .collect::<Result<Vec<_>>>()?;
        for ((r0, c0), curves) in swept {
            for (cell, curve) in curves.iter().enumerate() {
                let (r, c) = (r0 + cell / 5, c0 + cell % 5);
                if !field.is_valid(r, c) {
                    continue;
                }
                let i = r * w + c;
                accumulate(&mut sums[i * steps..(i + 1) * steps], curve);
                counts[i] += 1;
            }
        }
    }

    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    for site in field.valid_sites() {
        let i = site.0 * w + site.1;
        if counts[i] == 0 {
            skipped.push(site);
            continue;
        }
        let raw = finish_mean(site, sums[i * steps..(i + 1) * steps].to_vec(), counts[i])?;
        curves.push(align(&raw));
    }
    if !skipped.is_empty() {
        warn!(target: "curves", "skipped={} reason=no_valid_patch first={:?}", skipped.len(), skipped[0]);
    }
    if curves.is_empty() {
        return Err(Error::InvalidArgument(
            "no site is covered by a valid patch; the field needs at least one 5×5 fully in-bounds window".into(),
        ));
    }
    info!(target: "curves", "sites={} skipped={} steps={steps} patch_half={PATCH_HALF}", curves.len(), skipped.len());
    Ok(CurveSet {
        grid: *grid,
        curves,
        skipped,
    })
}

/// CSV with header `site_row,site_col,<n_0>,...,<n_last>` and one row per curve.
pub fn write_curves_csv(path: impl AsRef<Path>, set: &CurveSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_curves_csv(&set.grid, &set.curves)).map_err(|e| Error::io(path, e))
}

pub fn render_curves_csv(grid: &NGrid, curves: &[ResponseCurve]) -> String {
    let mut out = String::from("site_row,site_col");
    for n in grid.samples() {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for curve in curves {
        let _ = write!(out, "{},{}", curve.site.0, curve.site.1);
        for v in &curve.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<CurveSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curves_csv(&text)
}

pub fn parse_curves_csv(text: &str) -> Result<CurveSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, 1, "empty curve file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[0] != "site_row" || cols[1] != "site_col" {
        return Err(Error::parse(1, 1, "header must start with `site_row,site_col` followed by ≥2 N values"));
    }
    let samples = cols[2..]
        .iter()
        .enumerate()
        .map(|(i, s)| s.parse::<f64>().map_err(|_| Error::parse(1, i + 3, format!("bad N value `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let grid = NGrid::new(samples[0], *samples.last().unwrap_or(&samples[0]), samples.len())?;
    let mut curves = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(Error::parse(
                line_no,
                cells.len().min(cols.len()) + 1,
                format!("expected {} columns, found {}", cols.len(), cells.len()),
            ));
        }
        let idx = |c: usize| -> Result<usize> {
            cells[c]
                .parse()
                .map_err(|_| Error::parse(line_no, c + 1, "site index must be a non-negative integer"))
        };
        let site = (idx(0)?, idx(1)?);
        let values = cells[2..]
            .iter()
            .enumerate()
            .map(|(k, s)| s.parse::<f64>().map_err(|_| Error::parse(line_no, k + 3, format!("non-numeric value `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let aligned = values.iter().copied().fold(f64::INFINITY, f64::min) == 0.0;
        curves.push(ResponseCurve { site, values, aligned });
    }
    Ok(CurveSet {
        grid,
        curves,
        skipped: Vec::new(),
    })
}
