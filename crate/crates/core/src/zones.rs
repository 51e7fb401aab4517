//! Fuzzy c-means zoning of fPCA score vectors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldRaster, Site};
use crate::fpca::ScoreVector;

pub const DEFAULT_FUZZIFIER: f64 = 2.0;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 300;
const INIT_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSettings {
    pub zones: usize,
    pub fuzzifier: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            zones: 4,
            fuzzifier: DEFAULT_FUZZIFIER,
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneModel {
    pub c: usize,
    pub m: f64,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    /// Sites in the order of `memberships` rows.
    pub sites: Vec<Site>,
    pub memberships: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Zone count for a field profile, or the explicit override. Must land in
/// `[2, 8]`.
pub fn zone_counts_default(profile: &str, explicit: Option<usize>) -> Result<usize> {
    let c = match explicit {
        Some(c) => c,
        None => match profile {
            "heterogeneous" => 4,
            "homogeneous" => 3,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown field profile '{other}' (expected heterogeneous or homogeneous)"
                )))
            }
        },
    };
    if !(2..=8).contains(&c) {
        return Err(Error::InvalidArgument(format!("zone count {c} outside [2, 8]")));
    }
    Ok(c)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// First index of the largest entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fuzzy membership of `point` in each centroid. A point sitting exactly on a
/// centroid belongs to it fully (first such centroid on ties).
pub fn membership_vector(centroids: &[Vec<f64>], m: f64, point: &[f64]) -> Vec<f64> {
    let d2: Vec<f64> = centroids.iter().map(|v| sq_dist(point, v)).collect();
    let mut out = vec![0.0; centroids.len()];
    if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
        out[hit] = 1.0;
        return out;
    }
    let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let p = 1.0 / (m - 1.0);
    for (o, d) in out.iter_mut().zip(&d2) {
        *o = (min / d).powf(p);
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|o| *o /= total);
    out
}

fn objective(points: &[&[f64]], centroids: &[Vec<f64>], u: &[Vec<f64>], m: f64) -> f64 {
    points
        .iter()
        .zip(u)
        .map(|(x, row)| {
            row.iter()
                .zip(centroids)
                .map(|(uz, v)| uz.powf(m) * sq_dist(x, v))
                .sum::<f64>()
        })
        .sum()
}

fn farthest_point_init(points: &[&[f64]], c: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<f64>>> {
    let start = rng.random_range(0..points.len());
    let mut chosen = vec![start];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, points[start])).collect();
    while chosen.len() < c {
        let next = argmax(&nearest);
        if nearest[next] == 0.0 {
            return None;
        }
        chosen.push(next);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, points[next]));
        }
    }
    Some(chosen.iter().map(|&i| points[i].to_vec()).collect())
}

/// Iteration state of fuzzy c-means; `cluster` drives it to convergence.
#[derive(Debug, Clone)]
pub struct FcmState<'a> {
    points: Vec<&'a [f64]>,
    m: f64,
    centroids: Vec<Vec<f64>>,
    memberships: Vec<Vec<f64>>,
    objective_history: Vec<f64>,
    iterations: usize,
}

impl<'a> FcmState<'a> {
    pub fn new(points: Vec<&'a [f64]>, c: usize, m: f64, seed: u64) -> Result<Self> {
        if c < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 zones, got {c}")));
        }
        if points.len() < c {
            return Err(Error::InvalidArgument(format!(
                "{} points cannot form {c} zones",
                points.len()
            )));
        }
        if !(m > 1.0) || !m.is_finite() {
            return Err(Error::InvalidArgument(format!("fuzzifier must exceed 1, got {m}")));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("score vectors must share a non-zero length".into()));
        }
        if points.iter().flat_map(|p| p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite score".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centroids = (0..INIT_ATTEMPTS)
            .find_map(|_| farthest_point_init(&points, c, &mut rng))
            .ok_or_else(|| {
                Error::DegenerateClustering(format!(
                    "fewer than {c} distinct score vectors after {INIT_ATTEMPTS} initialization attempts"
                ))
            })?;
        let mut state = FcmState {
            points,
            m,
            centroids,
            memberships: Vec::new(),
            objective_history: Vec::new(),
            iterations: 0,
        };
        state.update_memberships();
        Ok(state)
    }

    fn update_memberships(&mut self) {
        self.memberships = self
            .points
            .iter()
            .map(|p| membership_vector(&self.centroids, self.m, p))
            .collect();
        let j = objective(&self.points, &self.centroids, &self.memberships, self.m);
        self.objective_history.push(j);
    }

    /// One centroid update followed by a membership update. Returns the
    /// largest centroid displacement.
    pub fn step(&mut self) -> f64 {
        let dim = self.points[0].len();
        let mut shift: f64 = 0.0;
        for z in 0..self.centroids.len() {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (p, row) in self.points.iter().zip(&self.memberships) {
                let w = row[z].powf(self.m);
                den += w;
                for (acc, x) in num.iter_mut().zip(p.iter()) {
                    *acc += w * x;
                }
            }
            if den > 0.0 {
                num.iter_mut().for_each(|v| *v /= den);
                shift = shift.max(sq_dist(&num, &self.centroids[z]).sqrt());
                self.centroids[z] = num;
            }
        }
        self.update_memberships();
        self.iterations += 1;
        shift
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn memberships(&self) -> &[Vec<f64>] {
        &self.memberships
    }

    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Fuzzy c-means over score vectors.
pub fn cluster(scores: &[ScoreVector], settings: &ClusterSettings) -> Result<ZoneModel> {
    if !(settings.tol >= 0.0) {
        return Err(Error::InvalidArgument("tol must be non-negative".into()));
    }
    let points: Vec<&[f64]> = scores.iter().map(|s| s.scores.as_slice()).collect();
    let mut state = FcmState::new(points, settings.zones, settings.fuzzifier, settings.seed)?;
    let mut converged = false;
    while state.iterations() < settings.max_iter {
        let shift = state.step();
        debug!(target: "zones", "iter={} shift={shift:.3e} objective={:.6e}", state.iterations(), state.objective_history().last().unwrap());
        if shift < settings.tol {
            converged = true;
            break;
        }
    }
    info!(
        target: "zones",
        "zones={} iterations={} converged={converged} objective={:.6e}",
        settings.zones,
        state.iterations(),
        state.objective_history().last().unwrap()
    );
    let assignments = state.memberships.iter().map(|row| argmax(row)).collect();
    Ok(ZoneModel {
        c: settings.zones,
        m: settings.fuzzifier,
        seed: settings.seed,
        centroids: state.centroids,
        sites: scores.iter().map(|s| s.site).collect(),
        memberships: state.memberships,
        assignments,
        objective_history: state.objective_history,
        iterations: state.iterations,
        converged,
    })
}

impl ZoneModel {
    /// Zone id and membership vector of a new score.
    pub fn membership(&self, scores: &[f64]) -> Result<(usize, Vec<f64>)> {
        let k = self.centroids[0].len();
        if scores.len() != k {
            return Err(Error::Shape(format!("score has {} entries, model expects {k}", scores.len())));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite score".into()));
        }
        let u = membership_vector(&self.centroids, self.m, scores);
        Ok((argmax(&u), u))
    }

    pub fn zone_of(&self, site: Site) -> Option<usize> {
        self.sites.iter().position(|&s| s == site).map(|i| self.assignments[i])
    }

    pub fn zone_map(&self, field: &FieldRaster) -> Result<ZoneMap> {
        let (h, w) = (field.height(), field.width());
        let mut ids = vec![-1; h * w];
        for (&(r, c), &z) in self.sites.iter().zip(&self.assignments) {
            if r >= h || c >= w {
                return Err(Error::Shape(format!("site ({r}, {c}) outside {h}×{w} field")));
            }
            ids[r * w + c] = z as i32;
        }
        Ok(ZoneMap {
            height: h,
            width: w,
            zones: self.c,
            ids,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ZoneModel = serde_json::from_str(&text)?;
        if model.centroids.len() != model.c || model.c < 2 {
            return Err(Error::Shape("zone model centroid count does not match c".into()));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneMap {
    pub height: usize,
    pub width: usize,
    pub zones: usize,
    /// Row-major ids; −1 marks cells without a zone.
    pub ids: Vec<i32>,
}

impl ZoneMap {
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.ids[row * self.width + col]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.ids.chunks(self.width) {
            let line: Vec<String> = row.iter().map(i32::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Binary 8-bit PGM. Zones spread evenly over gray levels 0..=200;
    /// cells without a zone are 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        let span = self.zones.saturating_sub(1).max(1) as f64;
        out.extend(self.ids.iter().map(|&z| {
            if z < 0 {
                255
            } else {
                (z as f64 * 200.0 / span).round() as u8
            }
        }));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("labelings differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let pairs = |v: u64| (v * v.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&v| pairs(v)).sum();
    let rows: f64 = (0..ka).map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum())).sum();
    let expected = rows * cols / pairs(n as u64);
    let max = 0.5 * (rows + cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
