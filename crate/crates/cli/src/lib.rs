//! Command-line front end: `run`, `compare` and `inspect` over KITTI-format
//! detection directories.

mod frames;
mod inspect;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use fuzzy_nms::eval::latency_stats;
use fuzzy_nms::nms::SoftPenalty;
use fuzzy_nms::pipeline::{self, Engine, FrameOutcome, Variant};
use fuzzy_nms::report::{write_results, OutputFormat};
use fuzzy_nms::{load_config, IouMode, ToolkitConfig};
use rayon::prelude::*;

use crate::manifest::{FrameEntry, Manifest};

/// Frames processed untimed before latency measurement starts in bench mode.
const WARMUP_FRAMES: usize = 10;

#[derive(Parser)]
#[command(name = "fuzzy-nms", version, about = "Density- and volume-aware NMS for KITTI-format 3D detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Suppress every frame of a detection directory with one variant.
    Run(RunArgs),
    /// Evaluate all four variants against labels and print an AP table.
    Compare(CompareArgs),
    /// Dump membership curves, per-box classifications and histograms as CSV.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config file, or "default" for the built-in settings.
    #[arg(long, env = "FUZZY_NMS_CONFIG")]
    config: Option<String>,
    /// Overlap measure: bev or 3d. Overrides the config file.
    #[arg(long)]
    iou_mode: Option<String>,
    /// IoU threshold for the traditional and DIoU baselines.
    #[arg(long, default_value_t = 0.01)]
    iou: f64,
    /// Gaussian Soft-NMS sigma. Overrides the config file.
    #[arg(long)]
    sigma: Option<f64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Directory of per-frame detection files (<frame>.txt).
    #[arg(long)]
    input: PathBuf,
    /// Directory of per-frame label files.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// traditional, soft, diou or fuzzy.
    #[arg(long, default_value = "fuzzy")]
    variant: String,
    /// Directory receiving one result file per frame and manifest.json.
    #[arg(long)]
    output: PathBuf,
    /// kitti, json or csv.
    #[arg(long, default_value = "kitti")]
    format: String,
    /// Time frames one after another after a warm-up.
    #[arg(long)]
    bench: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory of per-frame detection files.
    #[arg(long)]
    input: PathBuf,
    /// Directory of per-frame label files with matching names.
    #[arg(long)]
    labels: PathBuf,
    /// Directory receiving metrics.csv and metrics.json.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InspectArgs {
    /// Detection directory; without it only membership curves are written.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Restrict per-box dumps to one frame id.
    #[arg(long)]
    frame: Option<String>,
    /// Directory receiving the CSV dumps.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// An error with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub const OTHER: u8 = 1;
    pub const MISSING_INPUT: u8 = 2;
    pub const INVALID_CONFIG: u8 = 3;

    pub fn new(code: u8, error: anyhow::Error) -> Self {
        Self { code, error }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::new(Failure::OTHER, error)
    }
}

fn invalid(msg: String) -> Failure {
    Failure::new(Failure::INVALID_CONFIG, anyhow!(msg))
}

/// Parses `args` (program name first) and runs the chosen subcommand.
/// Returns the process exit code; errors are reported on stderr.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Inspect(a) => inspect::inspect(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

/// Loads the config named on the command line and applies flag overrides.
fn resolve_config(common: &Common) -> Result<ToolkitConfig, Failure> {
    let mut cfg = match common.config.as_deref() {
        None | Some("default") => ToolkitConfig::default(),
        Some(path) => load_config(path).map_err(|e| invalid(format!("invalid config {path}: {e}")))?,
    };
    if let Some(mode) = &common.iou_mode {
        let mode: IouMode = mode.parse().map_err(invalid)?;
        cfg = cfg.with_iou_mode(mode);
    }
    if let Some(sigma) = common.sigma {
        cfg.soft.penalty = SoftPenalty::Gaussian { sigma };
    }
    cfg.soft.validate().map_err(|e| invalid(e.to_string()))?;
    if !(0.0..=1.0).contains(&common.iou) {
        return Err(invalid(format!("--iou must lie in [0, 1], got {}", common.iou)));
    }
    Ok(cfg)
}

fn parse_variant(name: &str, common: &Common, cfg: &ToolkitConfig) -> Result<Variant, Failure> {
    match name {
        "traditional" => Ok(Variant::Traditional { iou: common.iou }),
        "soft" => Ok(Variant::Soft(cfg.soft)),
        "diou" => Ok(Variant::Diou { iou: common.iou }),
        "fuzzy" => Ok(Variant::Fuzzy),
        other => Err(invalid(format!(
            "unknown variant '{other}'; valid variants: {}",
            Variant::NAMES.join(", ")
        ))),
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(invalid("--jobs must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    Ok(b.build().context("cannot start worker threads")?)
}

fn engine(cfg: ToolkitConfig) -> Result<Engine, Failure> {
    Engine::new(cfg).map_err(|e| invalid(e.to_string()))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let variant = parse_variant(&args.variant, &args.common, &cfg)?;
    let format: OutputFormat = args.format.parse().map_err(invalid)?;
    let pool = thread_pool(args.common.jobs)?;
    let engine = engine(cfg)?;

    let frames = pool.install(|| frames::load(&args.input, args.labels.as_deref(), &engine.config.parse_options()))?;
    let outcomes: Vec<FrameOutcome> = if args.bench {
        bench(&engine, &frames, &variant)?
    } else {
        pool.install(|| frames.par_iter().map(|f| engine.run(&f.frame, &variant)).collect::<Result<Vec<_>, _>>())
            .map_err(|e| anyhow!(e))?
    };

    write_results(&args.output, &frames, &outcomes, variant.name(), engine.iou_mode(), format)
        .with_context(|| format!("cannot write results to {}", args.output.display()))?;

    let entries: Vec<FrameEntry> = frames.iter().zip(&outcomes).map(|(f, o)| FrameEntry::new(f, o)).collect();
    let latencies: Vec<f64> = outcomes.iter().map(|o| o.elapsed_ms).collect();
    let manifest = Manifest::new(&engine, &variant, format, &args.input, args.bench, entries, latency_stats(&latencies));
    manifest.write(&args.output.join("manifest.json"))?;
    log::info!("{} frames written to {}", frames.len(), args.output.display());
    Ok(())
}

/// Sequential timing after a short warm-up on the leading frames.
fn bench(engine: &Engine, frames: &[fuzzy_nms::KittiFrame], variant: &Variant) -> Result<Vec<FrameOutcome>, Failure> {
    for f in frames.iter().take(WARMUP_FRAMES) {
        engine.run(&f.frame, variant).map_err(|e| anyhow!(e))?;
    }
    let start = Instant::now();
    let out = frames
        .iter()
        .map(|f| engine.run(&f.frame, variant))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| anyhow!(e))?;
    let (mean, p95) = latency_stats(&out.iter().map(|o| o.elapsed_ms).collect::<Vec<_>>());
    eprintln!(
        "{} frames in {:.2} ms: mean {mean:.2} ms, p95 {p95:.2} ms per frame",
        frames.len(),
        start.elapsed().as_secs_f64() * 1e3
    );
    Ok(out)
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let pool = thread_pool(args.common.jobs)?;
    let variants: Vec<(String, Variant)> = Variant::NAMES
        .iter()
        .map(|n| parse_variant(n, &args.common, &cfg).map(|v| (n.to_string(), v)))
        .collect::<Result<_, _>>()?;
    let engine = engine(cfg)?;
    let spec = engine.config.eval_spec();
    let frames = pool.install(|| frames::load(&args.input, Some(&args.labels), &engine.config.parse_options()))?;
    let table = pipeline::compare_runs(&engine, &frames, &variants, &spec).map_err(|e| anyhow!(e))?;

    let csv = table.to_csv().context("cannot format metrics")?;
    write_file(&args.output, "metrics.csv", &csv)?;
    write_file(&args.output, "metrics.json", &(table.to_json().context("cannot format metrics")? + "\n"))?;
    print!("{csv}");
    Ok(())
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
