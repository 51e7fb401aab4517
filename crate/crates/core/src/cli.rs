//! Pipeline orchestration: run configuration, the all-in-one run with its
//! hashed manifest, plot exports, and the `rz` command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cfe::{self, CfeResult, CfeSettings, RelevanceReport};
use crate::error::{Error, Result};
use crate::field::{
    extract_patches, generate_synthetic, load_field, load_yield, split_patches, write_field, write_yield,
    FieldRaster, SyntheticSpec, YieldRaster,
};
use crate::fpca::{FpcaModel, FpcaSettings};
use crate::response::{field_curves, read_curves_csv, render_curves_csv, write_curves_csv, CurveSet, NGrid};
use crate::surrogate::{train, Activation, DenseNet, Optimizer, TrainConfig, TrainReport, DEFAULT_HIDDEN};
use crate::zones::{cluster, zone_counts_default, ClusterSettings, ZoneModel};

pub const STAGES: [&str; 7] = ["ingest", "train", "curves", "fpca", "cluster", "explain", "report"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSettings {
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub train: TrainConfig,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        SurrogateSettings {
            hidden: DEFAULT_HIDDEN.to_vec(),
            seed: 0,
            split_fraction: 0.9,
            split_seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneSettings {
    /// Explicit zone count; falls back to the profile default.
    pub zones: Option<usize>,
    pub profile: String,
    pub fuzzifier: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ZoneSettings {
    fn default() -> Self {
        let c = ClusterSettings::default();
        ZoneSettings {
            zones: None,
            profile: "heterogeneous".into(),
            fuzzifier: c.fuzzifier,
            seed: c.seed,
            max_iter: c.max_iter,
            tol: c.tol,
        }
    }
}

impl ZoneSettings {
    pub fn resolve(&self) -> Result<ClusterSettings> {
        Ok(ClusterSettings {
            zones: zone_counts_default(&self.profile, self.zones)?,
            fuzzifier: self.fuzzifier,
            seed: self.seed,
            max_iter: self.max_iter,
            tol: self.tol,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSettings {
    pub enabled: bool,
    pub curves_per_zone: usize,
    pub seed: u64,
}

impl Default for PlotSettings {
    fn default() -> Self {
        PlotSettings {
            enabled: true,
            curves_per_zone: 50,
            seed: 0,
        }
    }
}

/// Single configuration for the whole pipeline. Either `field` and
/// `yield_map` point at csv-grid files, or `synthetic` describes a generated
/// field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub field: Option<PathBuf>,
    pub yield_map: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub surrogate: SurrogateSettings,
    pub grid: NGrid,
    pub fpca: FpcaSettings,
    pub zones: ZoneSettings,
    pub cfe: CfeSettings,
    pub plots: PlotSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("rz-out"),
            field: None,
            yield_map: None,
            synthetic: Some(SyntheticSpec::default()),
            surrogate: SurrogateSettings::default(),
            grid: NGrid::default(),
            fpca: FpcaSettings::default(),
            zones: ZoneSettings::default(),
            cfe: CfeSettings::default(),
            plots: PlotSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)?;
        // relative input paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.field, &mut config.yield_map].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.field, &self.yield_map, &self.synthetic) {
            (Some(f), Some(y), None) => {
                for p in [f, y] {
                    if !p.is_file() {
                        return Err(Error::InvalidArgument(format!("input file {} does not exist", p.display())));
                    }
                }
            }
            (None, None, Some(spec)) => spec.validate()?,
            _ => {
                return Err(Error::InvalidArgument(
                    "give either both `field` and `yield_map`, or `synthetic`".into(),
                ))
            }
        }
        self.grid.validate()?;
        let s = &self.surrogate;
        if !(s.split_fraction > 0.0 && s.split_fraction < 1.0) {
            return Err(Error::InvalidArgument("split_fraction must be in (0, 1)".into()));
        }
        if !(self.fpca.variance_target > 0.0 && self.fpca.variance_target <= 1.0) || self.fpca.k_max == 0 {
            return Err(Error::InvalidArgument("fpca variance_target must be in (0, 1] and k_max ≥ 1".into()));
        }
        let clusters = self.zones.resolve()?;
        self.cfe.validate(clusters.zones)?;
        if self.plots.curves_per_zone == 0 {
            return Err(Error::InvalidArgument("plots.curves_per_zone must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    /// One primary artifact per stage, in stage order.
    pub artifacts: Vec<ArtifactEntry>,
    /// Supporting files (yield map, maps, plot exports).
    pub extras: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.artifacts
            .iter()
            .chain(&self.extras)
            .map(|a| (a.path.clone(), a.sha256.clone()))
            .collect()
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    info!(target: "run", "stage={name} status=start");
    let out = f().map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })?;
    info!(target: "run", "stage={name} status=done");
    Ok(out)
}

/// Everything the run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub field: FieldRaster,
    pub yields: YieldRaster,
    /// Latent classes when the field was synthetic.
    pub classes: Option<Vec<i32>>,
    pub model: DenseNet,
    pub train_report: TrainReport,
    pub curves: CurveSet,
    pub fpca: FpcaModel,
    pub zones: ZoneModel,
    pub cfe: Vec<CfeResult>,
    pub relevance: RelevanceReport,
}

struct Recorder {
    root: PathBuf,
    artifacts: Vec<ArtifactEntry>,
    extras: Vec<ArtifactEntry>,
}

impl Recorder {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn entry(&self, stage: &str, name: &str) -> Result<ArtifactEntry> {
        Ok(ArtifactEntry {
            stage: stage.into(),
            path: name.into(),
            sha256: sha256_file(self.path(name))?,
        })
    }

    fn primary(&mut self, stage: &str, name: &str) -> Result<()> {
        let e = self.entry(stage, name)?;
        self.artifacts.push(e);
        Ok(())
    }

    fn extra(&mut self, stage: &str, name: &str) -> Result<()> {
        let e = self.entry(stage, name)?;
        self.extras.push(e);
        Ok(())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run every stage in order, writing artifacts and `manifest.json` under
/// `config.output_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let root = config.output_dir.clone();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let mut rec = Recorder {
        root: root.clone(),
        artifacts: Vec::new(),
        extras: Vec::new(),
    };

    let (field, yields, classes) = stage("ingest", || {
        let (field, yields, classes) = match &config.synthetic {
            Some(spec) => {
                let s = generate_synthetic(spec)?;
                (s.field, s.yields, Some(s.classes))
            }
            None => (
                load_field(config.field.as_ref().unwrap())?,
                load_yield(config.yield_map.as_ref().unwrap())?,
                None,
            ),
        };
        write_field(rec.path("field.csv"), &field)?;
        write_yield(rec.path("yield.csv"), &yields, field.cell_size_m())?;
        rec.primary("ingest", "field.csv")?;
        rec.extra("ingest", "yield.csv")?;
        if let Some(c) = &classes {
            write_text(&rec.path("truth_classes.csv"), &grid_csv(c, field.width()))?;
            rec.extra("ingest", "truth_classes.csv")?;
        }
        info!(target: "ingest", "height={} width={} features={} valid={}", field.height(), field.width(), field.n_features(), field.n_valid());
        Ok((field, yields, classes))
    })?;

    let (model, train_report) = stage("train", || {
        let s = &config.surrogate;
        let patches = extract_patches(&field, &yields)?;
        let (tr, va) = split_patches(patches, s.split_fraction, s.split_seed)?;
        let mut net = DenseNet::for_field(&field, yields.range(), &s.hidden, Activation::Tanh, s.seed)?;
        let report = train(&mut net, &tr, &va, &s.train)?;
        net.save(rec.path("model.json"))?;
        write_text(&rec.path("train_report.json"), &serde_json::to_string_pretty(&report)?)?;
        rec.primary("train", "model.json")?;
        rec.extra("train", "train_report.json")?;
        Ok((net, report))
    })?;

    let curves = stage("curves", || {
        let set = field_curves(&model, &field, &config.grid)?;
        write_curves_csv(rec.path("curves.csv"), &set)?;
        rec.primary("curves", "curves.csv")?;
        Ok(set)
    })?;

    let fpca = stage("fpca", || {
        let model = FpcaModel::fit_curves(&curves.curves, &config.fpca)?;
        info!(target: "fpca", "k={} explained={:.6}", model.k, model.explained_ratio.iter().sum::<f64>());
        model.save(rec.path("fpca.json"))?;
        rec.primary("fpca", "fpca.json")?;
        Ok(model)
    })?;

    let zones = stage("cluster", || {
        let scores = curves
            .curves
            .iter()
            .map(|c| fpca.transform_curve(c))
            .collect::<Result<Vec<_>>>()?;
        let zones = cluster(&scores, &config.zones.resolve()?)?;
        zones.save(rec.path("zones.json"))?;
        let map = zones.zone_map(&field)?;
        map.write_csv(rec.path("zones.csv"))?;
        rec.primary("cluster", "zones.json")?;
        rec.extra("cluster", "zones.csv")?;
        Ok(zones)
    })?;

    let results = stage("explain", || {
        let results = cfe::explain_field(&field, &model, &config.grid, &fpca, &zones, &config.cfe)?;
        cfe::write_jsonl(rec.path("cfe.jsonl"), &results)?;
        rec.primary("explain", "cfe.jsonl")?;
        Ok(results)
    })?;

    let relevance = stage("report", || {
        let report = cfe::global_relevance(&results, field.feature_names(), zones.c);
        report.save(rec.path("relevance.json"))?;
        report.write_csv(rec.path("relevance.csv"))?;
        rec.primary("report", "relevance.json")?;
        rec.extra("report", "relevance.csv")?;
        if config.plots.enabled {
            for name in emit_plots(&root.join("plots"), &field, &curves, &zones, &report, &config.plots)? {
                rec.extra("report", &format!("plots/{name}"))?;
            }
        }
        Ok(report)
    })?;

    let manifest = Manifest {
        config: config.clone(),
        artifacts: rec.artifacts,
        extras: rec.extras,
    };
    let mpath = root.join("manifest.json");
    write_text(&mpath, &serde_json::to_string_pretty(&manifest)?)?;
    info!(target: "run", "manifest={} artifacts={}", mpath.display(), manifest.artifacts.len());
    Ok(RunOutput {
        manifest,
        field,
        yields,
        classes,
        model,
        train_report,
        curves,
        fpca,
        zones,
        cfe: results,
        relevance,
    })
}

fn grid_csv(values: &[i32], width: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(i32::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Plot-ready exports: a seeded sample of curves per zone, the zone map as
/// PGM, and relevance bars. Returns the file names written inside `dir`.
pub fn emit_plots(
    dir: &Path,
    field: &FieldRaster,
    curves: &CurveSet,
    zones: &ZoneModel,
    report: &RelevanceReport,
    settings: &PlotSettings,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for z in 0..zones.c {
        let members: Vec<_> = curves
            .curves
            .iter()
            .filter(|c| zones.zone_of(c.site) == Some(z))
            .cloned()
            .collect();
        if members.len() < settings.curves_per_zone {
            warn!(target: "report", "zone={z} curves={} requested={} note=exporting_all", members.len(), settings.curves_per_zone);
        }
        let mut sample: Vec<_> = members
            .choose_multiple(&mut rng, settings.curves_per_zone.min(members.len()))
            .cloned()
            .collect();
        sample.sort_by_key(|c| c.site);
        let name = format!("zone_{z}_curves.csv");
        write_text(&dir.join(&name), &render_curves_csv(&curves.grid, &sample))?;
        written.push(name);
    }
    let name = "zones.pgm".to_string();
    zones.zone_map(field)?.write_pgm(dir.join(&name))?;
    written.push(name);

    let mut bars = String::from("zone,feature,ratio\n");
    for z in &report.zones {
        if let Some(r) = &z.ratios {
            for (f, v) in report.features.iter().zip(r) {
                bars.push_str(&format!("{},{f},{v}\n", z.zone));
            }
        }
    }
    let name = "relevance_bars.csv".to_string();
    write_text(&dir.join(&name), &bars)?;
    written.push(name);
    Ok(written)
}

/// Apply `RZ_THREADS` to the global rayon pool. Unset or invalid values keep
/// rayon's default.
pub fn configure_threads() {
    if let Some(n) = std::env::var("RZ_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Stage-tagged `key=value` log lines on stderr.
pub fn init_logging(verbose: bool) {
    let default = if verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format(|buf, record| {
            writeln!(buf, "level={} stage={} {}", record.level().as_str().to_lowercase(), record.target(), record.args())
        })
        .try_init();
}

#[derive(Debug, Parser)]
#[command(name = "rz", version, about = "Fertilizer-responsivity management zones")]
pub struct Cli {
    /// Debug-level logging.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic field, yield map, and class raster.
    Synth(SynthArgs),
    /// Fit the patch surrogate on a field and yield map.
    Train(TrainArgs),
    /// Sweep nitrogen to build aligned response curves.
    Curves(CurvesArgs),
    /// Fit functional PCA on response curves.
    Fpca(FpcaArgs),
    /// Fuzzy c-means zoning of curve scores.
    Cluster(ClusterArgs),
    /// Counterfactual explanations of zone membership.
    Explain(ExplainArgs),
    /// Relevance report and plot exports.
    Report(ReportArgs),
    /// Every stage from one JSON config.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON synthetic spec; defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long = "out-field")]
    pub out_field: PathBuf,
    #[arg(long = "out-yield")]
    pub out_yield: PathBuf,
    #[arg(long = "out-classes")]
    pub out_classes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long = "yield")]
    pub yield_map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = TrainConfig::default().optimizer)]
    pub optimizer: Optimizer,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN.to_vec())]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub split: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long = "n-min", alias = "nmin", default_value_t = 0.0)]
    pub n_min: f64,
    #[arg(long = "n-max", alias = "nmax", default_value_t = 150.0)]
    pub n_max: f64,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = NGrid::default().steps)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct FpcaArgs {
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = FpcaSettings::default().variance_target)]
    pub target: f64,
    #[arg(long, default_value_t = FpcaSettings::default().k_max)]
    pub kmax: usize,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub fpca: PathBuf,
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub zones: Option<usize>,
    #[arg(long, default_value = "heterogeneous")]
    pub profile: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::zones::DEFAULT_FUZZIFIER)]
    pub fuzzifier: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Zone map image; needs `--field` for the raster shape.
    #[arg(long, requires = "field")]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub fpca: PathBuf,
    #[arg(long)]
    pub zones: PathBuf,
    #[arg(long)]
    pub field: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = CfeSettings::default().pop_size)]
    pub pop: usize,
    #[arg(long, default_value_t = CfeSettings::default().generations)]
    pub gens: usize,
    #[arg(long, default_value_t = CfeSettings::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "sites-per-zone")]
    pub sites_per_zone: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub cfe: PathBuf,
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub zones: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Directory for plot exports; needs `--curves`.
    #[arg(long, requires = "curves")]
    pub plots: Option<PathBuf>,
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long = "plot-seed", default_value_t = 0)]
    pub plot_seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn relevance_from(results: &[CfeResult], field: &FieldRaster, zones: &ZoneModel) -> RelevanceReport {
    cfe::global_relevance(results, field.feature_names(), zones.c)
}

/// Execute one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let mut spec = match &a.spec {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text)?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            if let Some(n) = a.size {
                spec.height = n;
                spec.width = n;
            }
            if let Some(sd) = a.noise {
                spec.noise_sd = sd;
            }
            let s = generate_synthetic(&spec)?;
            write_field(&a.out_field, &s.field)?;
            write_yield(&a.out_yield, &s.yields, s.field.cell_size_m())?;
            if let Some(p) = &a.out_classes {
                write_text(p, &grid_csv(&s.classes, s.field.width()))?;
            }
            info!(target: "synth", "height={} width={} classes={}", spec.height, spec.width, spec.n_classes());
        }
        Command::Train(a) => {
            let field = load_field(&a.field)?;
            let yields = load_yield(&a.yield_map)?;
            let patches = extract_patches(&field, &yields)?;
            let (tr, va) = split_patches(patches, a.split, a.seed)?;
            let mut net = DenseNet::for_field(&field, yields.range(), &a.hidden, Activation::Tanh, a.seed)?;
            let cfg = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch,
                learning_rate: a.lr,
                seed: a.seed,
                l2_penalty: a.l2,
                optimizer: a.optimizer,
            };
            train(&mut net, &tr, &va, &cfg)?;
            net.save(&a.out)?;
        }
        Command::Curves(a) => {
            let net = DenseNet::load(&a.model)?;
            let field = load_field(&a.field)?;
            let grid = NGrid::new(a.grid.n_min, a.grid.n_max, a.steps)?;
            write_curves_csv(&a.out, &field_curves(&net, &field, &grid)?)?;
        }
        Command::Fpca(a) => {
            let set = read_curves_csv(&a.curves)?;
            let settings = FpcaSettings {
                variance_target: a.target,
                k_max: a.kmax,
            };
            let model = FpcaModel::fit_curves(&set.curves, &settings)?;
            info!(target: "fpca", "k={} explained={:.6}", model.k, model.explained_ratio.iter().sum::<f64>());
            model.save(&a.out)?;
        }
        Command::Cluster(a) => {
            let fpca = FpcaModel::load(&a.fpca)?;
            let set = read_curves_csv(&a.curves)?;
            let scores = set
                .curves
                .iter()
                .map(|c| fpca.transform_curve(c))
                .collect::<Result<Vec<_>>>()?;
            let settings = ClusterSettings {
                zones: zone_counts_default(&a.profile, a.zones)?,
                fuzzifier: a.fuzzifier,
                seed: a.seed,
                ..ClusterSettings::default()
            };
            let zones = cluster(&scores, &settings)?;
            zones.save(&a.out)?;
            if let (Some(map), Some(field)) = (&a.map, &a.field) {
                let field = load_field(field)?;
                let zm = zones.zone_map(&field)?;
                zm.write_pgm(map)?;
                zm.write_csv(map.with_extension("csv"))?;
            }
        }
        Command::Explain(a) => {
            let net = DenseNet::load(&a.model)?;
            let fpca = FpcaModel::load(&a.fpca)?;
            let zones = ZoneModel::load(&a.zones)?;
            let field = load_field(&a.field)?;
            let grid = NGrid::new(a.grid.n_min, a.grid.n_max, fpca.steps())?;
            let settings = CfeSettings {
                pop_size: a.pop,
                generations: a.gens,
                epsilon: a.epsilon,
                seed: a.seed,
                sites_per_zone: a.sites_per_zone,
                ..CfeSettings::default()
            };
            let results = cfe::explain_field(&field, &net, &grid, &fpca, &zones, &settings)?;
            cfe::write_jsonl(&a.out, &results)?;
            if let Some(p) = &a.report {
                relevance_from(&results, &field, &zones).save(p)?;
            }
        }
        Command::Report(a) => {
            let results = cfe::read_jsonl(&a.cfe)?;
            let field = load_field(&a.field)?;
            let zones = ZoneModel::load(&a.zones)?;
            let report = relevance_from(&results, &field, &zones);
            report.save(&a.out)?;
            if let Some(p) = &a.csv {
                report.write_csv(p)?;
            }
            if let (Some(dir), Some(curves)) = (&a.plots, &a.curves) {
                let set = read_curves_csv(curves)?;
                let settings = PlotSettings {
                    seed: a.plot_seed,
                    ..PlotSettings::default()
                };
                emit_plots(dir, &field, &set, &zones, &report, &settings)?;
            }
        }
        Command::Run(a) => {
            let mut config = RunConfig::load(&a.config)?;
            if let Some(out) = a.out {
                config.output_dir = out;
            }
            run_pipeline(&config)?;
        }
    }
    Ok(())
}

/// Entry point for the `rz` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    configure_threads();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let stage = match &e {
                Error::Stage { stage, .. } => stage.as_str(),
                _ => "cli",
            };
            log::error!(target: "run", "stage={stage} error=\"{e}\"");
            eprintln!("error: {e}");
            1
        }
    }
}
