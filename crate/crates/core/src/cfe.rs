//! Counterfactual explanations of zone membership.
//!
//! For one site, NSGA-II searches over edits of the passive covariates in the
//! site's window. A candidate sets a chosen subset of passive features to one
//! value each across the whole window. Three objectives are minimized:
//! `g1` is −1 when the edited curve lands in another zone with membership
//! above ε (else 0), `g2` counts edited features, and `g3` is the mean
//! range-normalized size of the edits.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{window9, FieldRaster, Patch, Site};
use crate::fpca::FpcaModel;
use crate::response::{align, curve_from_window, NGrid};
use crate::surrogate::PatchRegressor;
use crate::zones::ZoneModel;

/// Channel holding the applied nitrogen rate; never perturbed.
pub const N_CHANNEL: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfeSettings {
    pub pop_size: usize,
    pub generations: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Random sample of sites explained per zone; all sites when `None`.
    pub sites_per_zone: Option<usize>,
    /// Chance that each passive feature is edited in a random initial candidate.
    pub init_mask_density: f64,
    pub crossover_prob: f64,
}

impl Default for CfeSettings {
    fn default() -> Self {
        CfeSettings {
            pop_size: 50,
            generations: 100,
            epsilon: 0.8,
            seed: 0,
            sites_per_zone: None,
            init_mask_density: 0.3,
            crossover_prob: 0.9,
        }
    }
}

impl CfeSettings {
    pub fn validate(&self, zones: usize) -> Result<()> {
        if self.pop_size < 4 || self.pop_size % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "population size must be even and at least 4, got {}",
                self.pop_size
            )));
        }
        if !(self.epsilon > 1.0 / zones as f64 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (1/{zones}, 1), got {}",
                self.epsilon
            )));
        }
        if !(0.0..=1.0).contains(&self.init_mask_density) || !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::InvalidArgument(
                "init_mask_density and crossover_prob must be probabilities".into(),
            ));
        }
        if self.sites_per_zone == Some(0) {
            return Err(Error::InvalidArgument("sites_per_zone must be at least 1".into()));
        }
        Ok(())
    }
}

/// Objectives, all minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub g1: i32,
    pub g2: usize,
    pub g3: f64,
}

impl Objectives {
    pub fn dominates(&self, other: &Objectives) -> bool {
        let le = self.g1 <= other.g1 && self.g2 <= other.g2 && self.g3 <= other.g3;
        let lt = self.g1 < other.g1 || self.g2 < other.g2 || self.g3 < other.g3;
        le && lt
    }

    pub fn lexicographic(&self, other: &Objectives) -> Ordering {
        self.g1
            .cmp(&other.g1)
            .then(self.g2.cmp(&other.g2))
            .then(self.g3.total_cmp(&other.g3))
    }
}

/// Edit of the passive features: `values[i]` is the replacement for passive
/// feature `i` when set, and `None` leaves the feature untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub values: Vec<Option<f64>>,
}

impl Genome {
    pub fn identity(n_passive: usize) -> Self {
        Genome {
            values: vec![None; n_passive],
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_some).collect()
    }

    pub fn changed(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
            .collect()
    }

    fn key(&self) -> Vec<u64> {
        self.values
            .iter()
            .map(|v| v.map_or(u64::MAX, |x| x.to_bits()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub genome: Genome,
    pub objectives: Objectives,
    pub new_zone: usize,
    pub new_membership: f64,
}

/// Outcome of pushing a (possibly edited) window through curve → scores →
/// zone membership.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneQuery {
    pub g1: i32,
    pub zone: usize,
    pub membership: f64,
    pub curve: Vec<f64>,
}

/// Everything needed to explain one site.
pub struct CfeProblem<'a> {
    pub site: Site,
    pub window: Vec<Patch>,
    /// Feature channels open to editing (all but nitrogen).
    pub passive: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub original_zone: usize,
    pub regressor: &'a dyn PatchRegressor,
    pub grid: NGrid,
    pub fpca: &'a FpcaModel,
    pub zones: &'a ZoneModel,
    /// Total feature count, the denominator of `g3`.
    pub n_features: usize,
    original: Vec<Vec<f64>>,
}

impl<'a> CfeProblem<'a> {
    /// Problem for `site` using its own window. The original zone is the one
    /// the unedited curve maps to.
    pub fn for_site(
        field: &FieldRaster,
        site: Site,
        regressor: &'a dyn PatchRegressor,
        grid: &NGrid,
        fpca: &'a FpcaModel,
        zones: &'a ZoneModel,
        epsilon: f64,
    ) -> Result<Self> {
        let window = window9(field, site)?;
        Self::from_window(site, window, field.feature_ranges(), regressor, grid, fpca, zones, epsilon)
    }

    /// Problem over an explicit window. `ranges` covers every channel
    /// including nitrogen.
    #[allow(clippy::too_many_arguments)]
    pub fn from_window(
        site: Site,
        window: Vec<Patch>,
        ranges: &[(f64, f64)],
        regressor: &'a dyn PatchRegressor,
        grid: &NGrid,
        fpca: &'a FpcaModel,
        zones: &'a ZoneModel,
        epsilon: f64,
    ) -> Result<Self> {
        let n = ranges.len();
        if n < 2 {
            return Err(Error::InvalidArgument("need at least one passive feature".into()));
        }
        if window.is_empty() {
            return Err(Error::NoValidPatch { row: site.0, col: site.1 });
        }
        if let Some(p) = window.iter().find(|p| p.n_features != n) {
            return Err(Error::Shape(format!(
                "patch at {:?} has {} channels, expected {n}",
                p.origin, p.n_features
            )));
        }
        if !(epsilon > 1.0 / zones.c as f64 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (1/{}, 1), got {epsilon}",
                zones.c
            )));
        }
        let passive: Vec<usize> = (0..n).filter(|&s| s != N_CHANNEL).collect();
        let bounds: Vec<(f64, f64)> = passive.iter().map(|&s| ranges[s]).collect();
        let original = passive
            .iter()
            .map(|&s| {
                window
                    .iter()
                    .flat_map(|p| p.cube.chunks_exact(n).map(move |cell| cell[s]))
                    .collect()
            })
            .collect();
        let mut problem = CfeProblem {
            site,
            window,
            passive,
            bounds,
            epsilon,
            original_zone: 0,
            regressor,
            grid: *grid,
            fpca,
            zones,
            n_features: n,
            original,
        };
        let start = problem.query(&problem.window)?;
        problem.original_zone = start.zone;
        Ok(problem)
    }

    pub fn n_passive(&self) -> usize {
        self.passive.len()
    }

    fn query(&self, window: &[Patch]) -> Result<ZoneQuery> {
        let curve = align(&curve_from_window(self.regressor, window, self.site, &self.grid)?);
        let scores = self.fpca.transform(&curve.values)?;
        let (zone, u) = self.zones.membership(&scores)?;
        let membership = u[zone];
        let flipped = zone != self.original_zone && membership > self.epsilon;
        Ok(ZoneQuery {
            g1: if flipped { -1 } else { 0 },
            zone,
            membership,
            curve: curve.values,
        })
    }
}

/// Window with each edited passive feature set uniformly across every cell
/// of every patch.
pub fn apply_candidate(problem: &CfeProblem, genome: &Genome) -> Result<Vec<Patch>> {
    if genome.values.len() != problem.n_passive() {
        return Err(Error::Shape(format!(
            "genome has {} entries, problem has {} passive features",
            genome.values.len(),
            problem.n_passive()
        )));
    }
    let mut window = problem.window.clone();
    for (i, v) in genome.values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let (lo, hi) = problem.bounds[i];
        if !(v >= lo && v <= hi) {
            return Err(Error::OutOfBounds {
                feature: problem.passive[i],
                value: v,
                min: lo,
                max: hi,
            });
        }
        for patch in &mut window {
            patch.fill_channel(problem.passive[i], v);
        }
    }
    Ok(window)
}

pub fn eval_g1(problem: &CfeProblem, window: &[Patch]) -> Result<ZoneQuery> {
    problem.query(window)
}

pub fn eval_g2(genome: &Genome) -> usize {
    genome.values.iter().filter(|v| v.is_some()).count()
}

/// Mean over features of the range-normalized mean absolute change across
/// the window cells.
pub fn eval_g3(problem: &CfeProblem, genome: &Genome) -> f64 {
    let mut total = 0.0;
    for (i, v) in genome.values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let (lo, hi) = problem.bounds[i];
        let range = hi - lo;
        if range <= 0.0 {
            warn!(target: "cfe", "feature={} zero range; contributes 0 to g3", problem.passive[i]);
            continue;
        }
        let cells = &problem.original[i];
        let mean_abs = cells.iter().map(|w| (w - v).abs()).sum::<f64>() / cells.len() as f64;
        total += mean_abs / range;
    }
    total / problem.n_features as f64
}

pub fn evaluate(problem: &CfeProblem, genome: &Genome) -> Result<Candidate> {
    let window = apply_candidate(problem, genome)?;
    let q = eval_g1(problem, &window)?;
    Ok(Candidate {
        genome: genome.clone(),
        objectives: Objectives {
            g1: q.g1,
            g2: eval_g2(genome),
            g3: eval_g3(problem, genome),
        },
        new_zone: q.zone,
        new_membership: q.membership,
    })
}

/// Fronts of the fast non-dominated sort, as index lists.
pub fn non_dominated_sort(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && objs[i].dominates(&objs[j]) {
                dominated_by[i].push(j);
            } else if i != j && objs[j].dominates(&objs[i]) {
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`, aligned with its order.
/// Ties in an objective sort lexicographically so the lexicographic best
/// sits at the boundary.
pub fn crowding_distance(objs: &[Objectives], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let getters: [fn(&Objectives) -> f64; 3] = [|o| o.g1 as f64, |o| o.g2 as f64, |o| o.g3];
    for get in getters {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            let (oa, ob) = (&objs[front[a]], &objs[front[b]]);
            get(oa).total_cmp(&get(ob)).then(oa.lexicographic(ob)).then(a.cmp(&b))
        });
        let lo = get(&objs[front[order[0]]]);
        let hi = get(&objs[front[order[m - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for k in 1..m - 1 {
                let prev = get(&objs[front[order[k - 1]]]);
                let next = get(&objs[front[order[k + 1]]]);
                dist[order[k]] += (next - prev) / (hi - lo);
            }
        }
    }
    dist
}

struct Search<'p, 'a> {
    problem: &'p CfeProblem<'a>,
    rng: ChaCha8Rng,
    cache: HashMap<Vec<u64>, Candidate>,
    settings: CfeSettings,
}

impl Search<'_, '_> {
    fn eval(&mut self, genome: Genome) -> Result<Candidate> {
        let key = genome.key();
        if let Some(c) = self.cache.get(&key) {
            return Ok(c.clone());
        }
        let c = evaluate(self.problem, &genome)?;
        self.cache.insert(key, c.clone());
        Ok(c)
    }

    fn uniform(&mut self, i: usize) -> f64 {
        let (lo, hi) = self.problem.bounds[i];
        if hi > lo {
            self.rng.random_range(lo..=hi)
        } else {
            lo
        }
    }

    fn random_genome(&mut self) -> Genome {
        let n = self.problem.n_passive();
        let values = (0..n)
            .map(|i| {
                if self.rng.random_bool(self.settings.init_mask_density) {
                    Some(self.uniform(i))
                } else {
                    None
                }
            })
            .collect();
        Genome { values }
    }

    fn crossover(&mut self, a: &Genome, b: &Genome) -> Genome {
        if !self.rng.random_bool(self.settings.crossover_prob) {
            return a.clone();
        }
        let values = (0..a.values.len())
            .map(|i| {
                let on = if self.rng.random_bool(0.5) { a.values[i].is_some() } else { b.values[i].is_some() };
                if !on {
                    return None;
                }
                Some(match (a.values[i], b.values[i]) {
                    (Some(x), Some(y)) => {
                        let u: f64 = self.rng.random();
                        u * x + (1.0 - u) * y
                    }
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => self.uniform(i),
                })
            })
            .collect();
        Genome { values }
    }

    fn mutate(&mut self, g: &mut Genome) {
        let n = g.values.len();
        let p = (1.0 / n as f64).min(0.5);
        for i in 0..n {
            if self.rng.random_bool(p) {
                g.values[i] = match g.values[i] {
                    Some(_) => None,
                    None => Some(self.uniform(i)),
                };
            } else if let Some(v) = g.values[i] {
                if self.rng.random_bool(p) {
                    let (lo, hi) = self.problem.bounds[i];
                    if hi > lo {
                        let step = Normal::new(0.0, 0.1 * (hi - lo)).unwrap().sample(&mut self.rng);
                        g.values[i] = Some((v + step).clamp(lo, hi));
                    }
                }
            }
        }
    }
}

/// Ranks and crowding of a population, for tournament selection.
fn rank_population(objs: &[Objectives]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; objs.len()];
    let mut crowd = vec![0.0; objs.len()];
    for (r, front) in non_dominated_sort(objs).iter().enumerate() {
        for (k, d) in front.iter().zip(crowding_distance(objs, front)) {
            rank[*k] = r;
            crowd[*k] = d;
        }
    }
    (rank, crowd)
}

fn survivors(pool: &[Candidate], size: usize) -> Vec<usize> {
    let objs: Vec<Objectives> = pool.iter().map(|c| c.objectives).collect();
    let mut keep = Vec::with_capacity(size);
    for front in non_dominated_sort(&objs) {
        if keep.len() + front.len() <= size {
            keep.extend_from_slice(&front);
            continue;
        }
        let dist = crowding_distance(&objs, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            dist[b]
                .total_cmp(&dist[a])
                .then(objs[front[a]].lexicographic(&objs[front[b]]))
                .then(a.cmp(&b))
        });
        keep.extend(order.iter().take(size - keep.len()).map(|&k| front[k]));
        break;
    }
    keep
}

/// NSGA-II over edits of the passive features; returns the final
/// non-dominated front (distinct genomes).
pub fn nsga2(problem: &CfeProblem, settings: &CfeSettings, seed: u64) -> Result<Vec<Candidate>> {
    settings.validate(problem.zones.c)?;
    let mut search = Search {
        problem,
        rng: ChaCha8Rng::seed_from_u64(seed),
        cache: HashMap::new(),
        settings: *settings,
    };
    let t0 = settings.pop_size;
    let mut pop = vec![search.eval(Genome::identity(problem.n_passive()))?];
    for _ in 1..t0 {
        let g = search.random_genome();
        pop.push(search.eval(g)?);
    }
    pop = dedup(pop);

    for _ in 0..settings.generations {
        let objs: Vec<Objectives> = pop.iter().map(|c| c.objectives).collect();
        let (rank, crowd) = rank_population(&objs);
        let better = |a: usize, b: usize| -> usize {
            if rank[a] != rank[b] {
                if rank[a] < rank[b] { a } else { b }
            } else if crowd[a] != crowd[b] {
                if crowd[a] > crowd[b] { a } else { b }
            } else {
                a.min(b)
            }
        };
        let indices: Vec<usize> = (0..pop.len()).collect();
        let mut offspring = Vec::with_capacity(t0);
        while offspring.len() < t0 {
            let pick = |rng: &mut ChaCha8Rng| {
                let a = *indices.choose(rng).unwrap();
                let b = *indices.choose(rng).unwrap();
                better(a, b)
            };
            let pa = pick(&mut search.rng);
            let pb = pick(&mut search.rng);
            let (ga, gb) = (pop[pa].genome.clone(), pop[pb].genome.clone());
            for (x, y) in [(&ga, &gb), (&gb, &ga)] {
                let mut child = search.crossover(x, y);
                search.mutate(&mut child);
                offspring.push(search.eval(child)?);
            }
        }
        let mut pool = pop;
        pool.extend(offspring);
        let pool = dedup(pool);
        let keep = survivors(&pool, t0);
        pop = keep.into_iter().map(|k| pool[k].clone()).collect();
    }

    let objs: Vec<Objectives> = pop.iter().map(|c| c.objectives).collect();
    let first = non_dominated_sort(&objs).swap_remove(0);
    Ok(first.into_iter().map(|k| pop[k].clone()).collect())
}

fn dedup(pool: Vec<Candidate>) -> Vec<Candidate> {
    let mut seen = std::collections::HashSet::new();
    pool.into_iter().filter(|c| seen.insert(c.genome.key())).collect()
}

/// Lexicographic best of a front by (g1, g2, g3), then by the list of
/// edited features.
pub fn select(front: &[Candidate]) -> Result<Candidate> {
    front
        .iter()
        .min_by(|a, b| {
            a.objectives
                .lexicographic(&b.objectives)
                .then_with(|| a.genome.changed().cmp(&b.genome.changed()))
                .then_with(|| a.genome.key().cmp(&b.genome.key()))
        })
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("cannot select from an empty front".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfeResult {
    pub site: Site,
    pub success: bool,
    /// Names of the edited features.
    pub alpha: Vec<String>,
    /// Channel indices of the edited features.
    pub alpha_channels: Vec<usize>,
    pub objectives: Objectives,
    pub old_zone: usize,
    pub new_zone: usize,
    pub new_membership: f64,
    pub genome: Genome,
    pub counterfactual_curve: Vec<f64>,
}

pub fn explain_site(
    problem: &CfeProblem,
    settings: &CfeSettings,
    seed: u64,
    feature_names: &[String],
) -> Result<CfeResult> {
    if feature_names.len() != problem.n_features {
        return Err(Error::Shape(format!(
            "{} feature names for {} features",
            feature_names.len(),
            problem.n_features
        )));
    }
    let front = nsga2(problem, settings, seed)?;
    let best = select(&front)?;
    let window = apply_candidate(problem, &best.genome)?;
    let q = eval_g1(problem, &window)?;
    let alpha_channels: Vec<usize> = best.genome.changed().iter().map(|&i| problem.passive[i]).collect();
    Ok(CfeResult {
        site: problem.site,
        success: best.objectives.g1 == -1,
        alpha: alpha_channels.iter().map(|&s| feature_names[s].clone()).collect(),
        alpha_channels,
        objectives: best.objectives,
        old_zone: problem.original_zone,
        new_zone: q.zone,
        new_membership: q.membership,
        genome: best.genome,
        counterfactual_curve: q.curve,
    })
}

/// Seed for one site, independent of scheduling.
pub fn site_seed(master: u64, site: Site) -> u64 {
    let mut z = master
        ^ (site.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (site.1 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sites to explain: all clustered sites, or a seeded sample per zone.
/// Row-major order.
pub fn choose_sites(zones: &ZoneModel, settings: &CfeSettings) -> Vec<Site> {
    let mut chosen = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for z in 0..zones.c {
        let members: Vec<Site> = zones
            .sites
            .iter()
            .zip(&zones.assignments)
            .filter(|(_, &a)| a == z)
            .map(|(s, _)| *s)
            .collect();
        match settings.sites_per_zone {
            Some(k) if k < members.len() => chosen.extend(members.choose_multiple(&mut rng, k).copied()),
            _ => chosen.extend(members),
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Explain many sites in parallel.
pub fn explain_field(
    field: &FieldRaster,
    regressor: &dyn PatchRegressor,
    grid: &NGrid,
    fpca: &FpcaModel,
    zones: &ZoneModel,
    settings: &CfeSettings,
) -> Result<Vec<CfeResult>> {
    settings.validate(zones.c)?;
    let sites = choose_sites(zones, settings);
    info!(target: "cfe", "sites={} pop={} gens={} epsilon={}", sites.len(), settings.pop_size, settings.generations, settings.epsilon);
    let results = sites
        .par_iter()
        .map(|&site| {
            let problem = CfeProblem::for_site(field, site, regressor, grid, fpca, zones, settings.epsilon)?;
            explain_site(&problem, settings, site_seed(settings.seed, site), field.feature_names())
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = results.iter().filter(|r| r.success).count();
    info!(target: "cfe", "explained={} success={ok}", results.len());
    Ok(results)
}

pub fn render_jsonl(results: &[CfeResult]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl(path: impl AsRef<Path>, results: &[CfeResult]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_jsonl(results)?).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<CfeResult>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    pub features: Vec<String>,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneRelevance {
    pub zone: usize,
    pub explained: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Share of successful explanations that edited each passive feature;
    /// `None` when the zone has no success.
    pub ratios: Option<Vec<f64>>,
    pub top_combos: Vec<Combo>,
}

impl ZoneRelevance {
    /// Passive feature with the largest ratio (first on ties).
    pub fn top_feature(&self) -> Option<usize> {
        self.ratios.as_ref().map(|r| crate::zones::argmax(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub features: Vec<String>,
    pub zones: Vec<ZoneRelevance>,
}

/// Per-zone edit frequencies and most common edit sets among successful
/// explanations, keyed by the explained site's original zone.
pub fn global_relevance(results: &[CfeResult], feature_names: &[String], zone_count: usize) -> RelevanceReport {
    let passive: Vec<usize> = (0..feature_names.len()).filter(|&s| s != N_CHANNEL).collect();
    let mut zones = Vec::new();
    for z in 0..zone_count {
        let in_zone: Vec<&CfeResult> = results.iter().filter(|r| r.old_zone == z).collect();
        if in_zone.is_empty() {
            continue;
        }
        let wins: Vec<&CfeResult> = in_zone.iter().copied().filter(|r| r.success).collect();
        let success_rate = wins.len() as f64 / in_zone.len() as f64;
        let (ratios, top_combos) = if wins.is_empty() {
            warn!(target: "report", "zone={z} successes=0 excluded_from_relevance=true");
            (None, Vec::new())
        } else {
            let total = wins.len() as f64;
            let ratios = passive
                .iter()
                .map(|s| wins.iter().filter(|r| r.alpha_channels.contains(s)).count() as f64 / total)
                .collect();
            let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for r in &wins {
                let mut key = r.alpha_channels.clone();
                key.sort_unstable();
                *counts.entry(key).or_default() += 1;
            }
            let mut combos: Vec<(Vec<usize>, usize)> = counts.into_iter().collect();
            combos.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let top = combos
                .into_iter()
                .take(5)
                .map(|(set, k)| Combo {
                    features: set.iter().map(|&s| feature_names[s].clone()).collect(),
                    percent: 100.0 * k as f64 / total,
                })
                .collect();
            (Some(ratios), top)
        };
        zones.push(ZoneRelevance {
            zone: z,
            explained: in_zone.len(),
            successes: wins.len(),
            success_rate,
            ratios,
            top_combos,
        });
    }
    RelevanceReport {
        features: passive.iter().map(|&s| feature_names[s].clone()).collect(),
        zones,
    }
}

impl RelevanceReport {
    /// One row per zone: explained count, success rate, then the ratio of
    /// each passive feature (empty when the zone had no success).
    pub fn to_csv(&self) -> String {
        let mut out = format!("zone,explained,success_rate,{}\n", self.features.join(","));
        for z in &self.zones {
            let cells: Vec<String> = match &z.ratios {
                Some(r) => r.iter().map(|v| format!("{v}")).collect(),
                None => vec![String::new(); self.features.len()],
            };
            let _ = writeln!(out, "{},{},{},{}", z.zone, z.explained, z.success_rate, cells.join(","));
        }
        out
    }

    pub fn save(&self, json: impl AsRef<Path>) -> Result<()> {
        let path = json.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
