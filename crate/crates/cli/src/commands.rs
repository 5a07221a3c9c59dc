//! Implementations of the `crpm` subcommands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Value};

use crpm_core::gradcheck::{run_gradcheck, CheckedOp, GradcheckConfig, DEFAULT_INSTANCES, DEFAULT_TOLERANCE};
use crpm_core::metrics::{confusion, MetricsReport};
use crpm_core::nets::{
    cs_cnn_spec, predict_crpm, predict_dilated, predict_patchwise, transfer_to_dilated, NetKind, NetworkSpec,
};
use crpm_core::polsar::{
    features_complex, load_c3, save_c3, synth_wishart_scene, CovarianceScene, Layout, NormStats, WishartSpec,
    C3_MAGIC, COMPLEX_FEATURE_NAMES,
};
use crpm_core::training::{sample_training_pixels, train_step1, train_step2, TrainConfig};
use crpm_core::{CTensor, Error, ScoreMap};

use crate::map_file::{ClassMap, Palette};
use crate::model_file::ModelFile;

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_DATA: i32 = 4;

/// A failed command: the process exit code plus a one-line message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.code {
            EXIT_IO => "io",
            EXIT_USAGE => "usage",
            EXIT_TRAINING => "training",
            EXIT_DATA => "data",
            _ => "internal",
        }
    }

    /// The machine-readable line written to stderr.
    pub fn json_line(&self) -> String {
        json!({"error": {"code": self.code, "kind": self.kind(), "message": self.message}}).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Default mapping from engine errors to exit codes.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Json(_) | Error::Format(_) => EXIT_IO,
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::Precondition(_) | Error::Training(_) | Error::NonFinite(_) => EXIT_TRAINING,
            Error::Dimension(_)
            | Error::ShapeMismatch(_)
            | Error::InvalidNetwork(_)
            | Error::EmptyConfusion
            | Error::DegenerateKappa => EXIT_DATA,
        };
        CliError::new(code, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_context(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| {
        let c = CliError::from(e);
        CliError::new(c.code, format!("{}: {}", path.display(), c.message))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", path.display(), e)))
}

#[derive(Debug, Parser)]
#[command(name = "crpm", version, about = "Complex-valued dense PolSAR classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled multilook Wishart scene.
    Synth(SynthArgs),
    /// Train the patch classifier and the fusion network.
    Train(TrainArgs),
    /// Classify a scene with a trained model.
    Predict(PredictArgs),
    /// Score a class map against reference labels.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Time patchwise, dilated and fusion inference on one scene.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Checkerboard,
    Voronoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetArg {
    Cs,
    Dilated,
    Crpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopAfter {
    Cs,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HxW, e.g. 192x192")?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height '{}'", h))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width '{}'", w))?;
    if h == 0 || w == 0 {
        return Err("size must be positive".into());
    }
    Ok((h, w))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output C3 file; the label map is also written next to it as `<stem>.labels.pgm`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, value_parser = parse_size, default_value = "192x192")]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 4)]
    pub looks: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::Checkerboard)]
    pub layout: LayoutArg,
    /// Block rows and columns of the checkerboard layout.
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    /// Region count of the Voronoi layout.
    #[arg(long, default_value_t = 12)]
    pub sites: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.005)]
    pub lr1: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr2: f64,
    #[arg(long, default_value_t = 100)]
    pub batch1: usize,
    #[arg(long, default_value_t = 5)]
    pub batch2: usize,
    #[arg(long, default_value_t = 60)]
    pub epochs1: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs2: usize,
    #[arg(long = "w-train", default_value_t = 50.0)]
    pub w_train: f64,
    #[arg(long = "w-error", default_value_t = 100.0)]
    pub w_error: f64,
    #[arg(long = "w-else", default_value_t = 0.5)]
    pub w_else: f64,
    /// Training pixels drawn per class.
    #[arg(long = "per-class", default_value_t = 300)]
    pub per_class: usize,
    /// Largest fraction of a class's labelled pixels used for training.
    #[arg(long = "max-rate", default_value_t = 0.1)]
    pub max_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "stop-after", value_enum)]
    pub stop_after: Option<StopAfter>,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            lr_step1: self.lr1,
            lr_step2: self.lr2,
            batch_step1: self.batch1,
            batch_step2: self.batch2,
            epochs_step1: self.epochs1,
            epochs_step2: self.epochs2,
            alpha: self.alpha,
            gamma: self.gamma,
            w_train: self.w_train,
            w_error: self.w_error,
            w_else: self.w_else,
            per_class_count: self.per_class,
            max_rate: self.max_rate,
            seed: self.seed,
        }
    }
}

/// The hyper-parameter echo printed at the start of training.
pub fn config_line(cfg: &TrainConfig) -> String {
    format!(
        "alpha={} gamma={} lr1={} lr2={} batch1={} batch2={} epochs1={} epochs2={} w-train={} w-error={} w-else={}",
        cfg.alpha,
        cfg.gamma,
        cfg.lr_step1,
        cfg.lr_step2,
        cfg.batch_step1,
        cfg.batch_step2,
        cfg.epochs_step1,
        cfg.epochs_step2,
        cfg.w_train,
        cfg.w_error,
        cfg.w_else
    )
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub net: NetArg,
    /// Output class map (PGM).
    #[arg(long)]
    pub out: PathBuf,
    /// Also render a colour PPM here.
    #[arg(long)]
    pub color: Option<PathBuf>,
    /// Palette JSON for the colour rendering; defaults to a built-in palette.
    #[arg(long)]
    pub palette: Option<PathBuf>,
    /// Dump the class probabilities as a `[classes, h, w]` tensor.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted class map (PGM).
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference labels: a PGM map or a C3 file with labels.
    #[arg(long)]
    pub labels: PathBuf,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_INSTANCES)]
    pub instances: usize,
    /// Skew one operation's analytic gradient (harness self-test).
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// A fusion-network model; its patch-classifier groups drive the other two paths.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Gradcheck(a) => gradcheck(&a),
        Command::Benchmark(a) => benchmark(&a),
    }
}

/// `<dir>/<stem>.labels.pgm` next to a scene file.
pub fn labels_path(scene: &Path) -> PathBuf {
    let stem = scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    scene.with_file_name(format!("{}.labels.pgm", stem))
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    if a.looks < 3 {
        return Err(CliError::new(
            EXIT_USAGE,
            format!("--looks must be at least 3, got {}", a.looks),
        ));
    }
    if a.classes == 0 || a.classes > 255 {
        return Err(CliError::new(EXIT_USAGE, "--classes must be between 1 and 255"));
    }
    let layout = match a.layout {
        LayoutArg::Checkerboard => Layout::Checkerboard {
            rows: a.blocks,
            cols: a.blocks,
        },
        LayoutArg::Voronoi => Layout::Voronoi { sites: a.sites },
    };
    let spec = WishartSpec {
        classes: a.classes,
        height: a.size.0,
        width: a.size.1,
        looks: a.looks,
        sigmas: None,
        layout,
        seed: a.seed,
    };
    let scene = synth_wishart_scene(&spec).map_err(|e| match e {
        Error::Precondition(m) | Error::InvalidArgument(m) => CliError::new(EXIT_USAGE, m),
        other => other.into(),
    })?;
    save_c3(&a.out, &scene).map_err(io_context(&a.out))?;
    let labels = scene.labels.as_deref().unwrap_or_default();
    let lp = labels_path(&a.out);
    ClassMap::from_labels(spec.height, spec.width, labels)?
        .save(&lp)
        .map_err(io_context(&lp))?;
    for k in 1..=a.classes {
        let n = labels.iter().filter(|&&l| usize::from(l) == k).count();
        println!("class={} pixels={}", k, n);
    }
    Ok(())
}

/// Normalised complex features of a scene and the statistics used.
pub fn scene_features(scene: &CovarianceScene, norm: Option<&NormStats>) -> CliResult<(CTensor, NormStats)> {
    let x = features_complex(scene);
    let stats = match norm {
        Some(n) => n.clone(),
        None => NormStats::fit(&x, &COMPLEX_FEATURE_NAMES)?,
    };
    let y = stats
        .apply(&x)
        .map_err(|e| CliError::new(EXIT_DATA, format!("normalisation does not fit the scene: {}", e)))?;
    Ok((y, stats))
}

fn training_error(e: Error) -> CliError {
    match e {
        Error::Io(_) => e.into(),
        other => CliError::new(EXIT_TRAINING, other.to_string()),
    }
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let cfg = a.config();
    cfg.validate().map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    println!("{}", config_line(&cfg));
    let scene = load_c3(&a.data).map_err(io_context(&a.data))?;
    let labels = scene
        .labels
        .clone()
        .ok_or_else(|| CliError::new(EXIT_TRAINING, "the training scene has no labels"))?;
    let (h, w) = (scene.height(), scene.width());
    let classes = scene.class_count;
    if classes < 2 {
        return Err(CliError::new(EXIT_TRAINING, "training needs at least two labelled classes"));
    }
    let (features, norm) = scene_features(&scene, None)?;
    let pixels = sample_training_pixels(&labels, w, classes, cfg.per_class_count, cfg.max_rate, cfg.seed)
        .map_err(training_error)?;
    info!("{} training pixels over {} classes", pixels.len(), classes);
    fs::create_dir_all(&a.out).map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", a.out.display(), e)))?;

    let mut heldout = labels.clone();
    for p in &pixels {
        heldout[p.y * w + p.x] = 0;
    }
    ClassMap::from_labels(h, w, &heldout)?
        .save(&a.out.join("heldout_labels.pgm"))
        .map_err(io_context(&a.out))?;
    let listing: Vec<Value> = pixels.iter().map(|p| json!([p.y, p.x, p.class + 1])).collect();
    write_file(
        &a.out.join("train_pixels.json"),
        serde_json::to_string(&listing).map_err(Error::from)?.as_bytes(),
    )?;

    let s1 = train_step1(&features, &pixels, classes, &cfg).map_err(training_error)?;
    let cs = ModelFile {
        spec: s1.spec.clone(),
        params: s1.params.clone(),
        norm: norm.clone(),
        config: Some(cfg.clone()),
        seed: cfg.seed,
    };
    cs.save(&a.out.join("cs.model")).map_err(io_context(&a.out))?;
    println!("wrote {}", a.out.join("cs.model").display());
    if a.stop_after == Some(StopAfter::Cs) {
        return Ok(());
    }

    let s2 = train_step2(&features, &s1.spec, &s1.params, &pixels, &cfg).map_err(training_error)?;
    ClassMap::from_classes(h, w, &s2.o_map)?
        .save(&a.out.join("o_map.pgm"))
        .map_err(io_context(&a.out))?;
    let crpm = ModelFile {
        spec: s2.spec,
        params: s2.params,
        norm,
        config: Some(cfg.clone()),
        seed: cfg.seed,
    };
    crpm.save(&a.out.join("crpm.model")).map_err(io_context(&a.out))?;
    println!("wrote {}", a.out.join("crpm.model").display());
    Ok(())
}

fn check_compatible(model: &ModelFile, features: &CTensor) -> CliResult<()> {
    if model.spec.in_channels != features.channels() {
        return Err(CliError::new(
            EXIT_DATA,
            format!(
                "model expects {} input channels, the scene provides {}",
                model.spec.in_channels,
                features.channels()
            ),
        ));
    }
    Ok(())
}

/// The patch classifier described by any model's parameter groups.
fn cs_spec_of(model: &ModelFile) -> NetworkSpec {
    match model.spec.kind {
        NetKind::CsCnn => model.spec.clone(),
        _ => cs_cnn_spec(model.spec.in_channels, model.spec.classes),
    }
}

/// Class probabilities of the whole scene with the chosen network.
pub fn predict_scores(model: &ModelFile, features: &CTensor, net: NetArg) -> CliResult<ScoreMap> {
    check_compatible(model, features)?;
    let data_err = |e: Error| match e {
        Error::Io(_) => CliError::from(e),
        other => CliError::new(EXIT_DATA, other.to_string()),
    };
    let cs = cs_spec_of(model);
    match net {
        NetArg::Cs => predict_patchwise(&cs, &model.params, features).map_err(data_err),
        NetArg::Dilated => {
            let d = transfer_to_dilated(&cs, &model.params).map_err(data_err)?;
            predict_dilated(&d, &model.params, features).map_err(data_err)
        }
        NetArg::Crpm => {
            if model.spec.kind != NetKind::Crpm {
                return Err(CliError::new(EXIT_DATA, "--net crpm needs a fusion-network model"));
            }
            predict_crpm(&model.spec, &model.params, features).map_err(data_err)
        }
    }
}

fn write_scores(path: &Path, s: &ScoreMap) -> CliResult<()> {
    let mut out = Vec::with_capacity(16 + 4 * s.data.len());
    out.extend_from_slice(&3u32.to_le_bytes());
    for d in [s.classes, s.height, s.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &s.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    write_file(path, &out)
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let model = ModelFile::load(&a.model).map_err(io_context(&a.model))?;
    let scene = load_c3(&a.data).map_err(io_context(&a.data))?;
    let (features, _) = scene_features(&scene, Some(&model.norm))?;
    let t = Instant::now();
    let scores = predict_scores(&model, &features, a.net)?;
    let elapsed = t.elapsed().as_secs_f64();
    let map = ClassMap::from_classes(scene.height(), scene.width(), &scores.argmax())?;
    map.save(&a.out).map_err(io_context(&a.out))?;
    if let Some(path) = &a.color {
        let palette = match &a.palette {
            Some(p) => {
                let text = fs::read(p).map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", p.display(), e)))?;
                Palette::from_json(&serde_json::from_slice(&text).map_err(Error::from)?)?
            }
            None => {
                let p = Palette::default_for(model.spec.classes);
                let side = path.with_extension("palette.json");
                write_file(&side, p.to_json().to_string().as_bytes())?;
                p
            }
        };
        write_file(path, &map.to_ppm(&palette))?;
    }
    if let Some(path) = &a.scores {
        write_scores(path, &scores)?;
    }
    println!("pred_time_s={:.6}", elapsed);
    Ok(())
}

/// Reference labels from a PGM map or from the label block of a C3 file.
pub fn load_labels(path: &Path) -> CliResult<ClassMap> {
    let bytes = fs::read(path).map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", path.display(), e)))?;
    if bytes.starts_with(C3_MAGIC) {
        let scene = load_c3(path).map_err(io_context(path))?;
        let labels = scene
            .labels
            .ok_or_else(|| CliError::new(EXIT_DATA, format!("{} carries no labels", path.display())))?;
        let (h, w) = (scene.planes.height(), scene.planes.width());
        Ok(ClassMap::from_labels(h, w, &labels)?)
    } else {
        ClassMap::from_pgm(&bytes).map_err(io_context(path))
    }
}

pub fn evaluate_maps(pred: &ClassMap, labels: &ClassMap) -> CliResult<MetricsReport> {
    if (pred.height, pred.width) != (labels.height, labels.width) {
        return Err(CliError::new(
            EXIT_DATA,
            format!(
                "prediction is {}x{} but the labels are {}x{}",
                pred.height, pred.width, labels.height, labels.width
            ),
        ));
    }
    if pred.data.contains(&0) {
        return Err(CliError::new(EXIT_DATA, "the prediction contains unlabeled (0) pixels"));
    }
    let classes = pred.data.iter().chain(&labels.data).copied().max().unwrap_or(0) as usize;
    let predicted: Vec<usize> = pred.data.iter().map(|&v| v as usize - 1).collect();
    let m = confusion(&predicted, &labels.labels(), classes.max(1)).map_err(|e| CliError::new(EXIT_DATA, e.to_string()))?;
    MetricsReport::from_confusion(&m).map_err(|e| CliError::new(EXIT_DATA, e.to_string()))
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let pred = ClassMap::load(&a.pred).map_err(io_context(&a.pred))?;
    let labels = load_labels(&a.labels)?;
    let report = evaluate_maps(&pred, &labels)?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    if let Some(path) = &a.report {
        write_file(path, text.as_bytes())?;
    }
    println!("{}", text);
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> CliResult<()> {
    let corrupt = match &a.corrupt {
        Some(s) => Some(s.parse::<CheckedOp>().map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?),
        None => None,
    };
    if !(a.tolerance > 0.0) {
        return Err(CliError::new(EXIT_USAGE, "--tolerance must be positive"));
    }
    let cfg = GradcheckConfig {
        seed: a.seed,
        tolerance: a.tolerance,
        instances: a.instances,
        corrupt,
    };
    let report = run_gradcheck(&cfg)?;
    println!("{}", report);
    let failed = report.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|o| o.name()).collect();
        Err(CliError::new(
            EXIT_TRAINING,
            format!("gradient check failed for {}", names.join(", ")),
        ))
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of `runs` evaluations.
fn time_median(runs: usize, mut f: impl FnMut() -> CliResult<()>) -> CliResult<f64> {
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timings {
    pub patchwise_s: f64,
    pub dilated_s: f64,
    pub crpm_s: f64,
}

impl Timings {
    pub fn to_json(&self, threads: usize, runs: usize) -> Value {
        json!({
            "patchwise_s": self.patchwise_s,
            "dilated_s": self.dilated_s,
            "crpm_s": self.crpm_s,
            "speedup_dilated": self.patchwise_s / self.dilated_s,
            "speedup_crpm": self.patchwise_s / self.crpm_s,
            "threads": threads,
            "runs": runs,
        })
    }
}

/// Times the three inference paths on the current thread pool.
pub fn time_paths(model: &ModelFile, features: &CTensor, runs: usize) -> CliResult<Timings> {
    // one untimed pass of each fast path warms caches and the allocator
    predict_scores(model, features, NetArg::Dilated)?;
    predict_scores(model, features, NetArg::Crpm)?;
    let patchwise_s = time_median(runs, || predict_scores(model, features, NetArg::Cs).map(drop))?;
    let dilated_s = time_median(runs, || predict_scores(model, features, NetArg::Dilated).map(drop))?;
    let crpm_s = time_median(runs, || predict_scores(model, features, NetArg::Crpm).map(drop))?;
    Ok(Timings {
        patchwise_s,
        dilated_s,
        crpm_s,
    })
}

pub fn benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    if a.runs == 0 {
        return Err(CliError::new(EXIT_USAGE, "--runs must be at least 1"));
    }
    let model = ModelFile::load(&a.model).map_err(io_context(&a.model))?;
    if model.spec.kind != NetKind::Crpm {
        return Err(CliError::new(EXIT_DATA, "benchmark needs a fusion-network model"));
    }
    let scene = load_c3(&a.data).map_err(io_context(&a.data))?;
    if scene.height() < 256 || scene.width() < 256 {
        return Err(CliError::new(
            EXIT_DATA,
            format!("benchmark needs a scene of at least 256x256, got {}x{}", scene.height(), scene.width()),
        ));
    }
    let (features, _) = scene_features(&scene, Some(&model.norm))?;
    let threads = rayon::current_num_threads();
    let timings = time_paths(&model, &features, a.runs)?;
    let mut report = timings.to_json(threads, a.runs);
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        let single = pool.install(|| time_paths(&model, &features, a.runs))?;
        report["single_thread"] = single.to_json(1, a.runs);
    }
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    if let Some(path) = &a.report {
        write_file(path, text.as_bytes())?;
    }
    println!("{}", text);
    Ok(())
}
