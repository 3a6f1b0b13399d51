//! Command-line front end. Each subcommand maps its failures onto a fixed
//! set of process exit codes.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::association::CostMode;
use crate::error::Error;
use crate::geometry::PanoramaRig;
use crate::io::{
    read_detections, read_jsonl, write_jsonl, DetectionRecord, GroundTruthRecord, LocationRecord, ReadError,
    TrackletRecord,
};
use crate::metrics::{evaluate, EvalParams, LabeledPoint};
use crate::pose::PoseParams;
use crate::synth::{generate_scene, SceneConfig};
use crate::tracker::{self, AppearanceUpdate, TrackerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_EMPTY_GROUND_TRUTH: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Config(String),
    #[error("no ground-truth records left to score")]
    EmptyGroundTruth,
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::EmptyGroundTruth => EXIT_EMPTY_GROUND_TRUTH,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyGroundTruth => CliError::EmptyGroundTruth,
            Error::ConfigInvalid(_) | Error::InvalidRig(_) | Error::InvalidTrackerConfig(_) => {
                CliError::Config(e.to_string())
            }
            Error::NonMonotoneFrame { .. } | Error::DuplicateRecord { .. } => CliError::Schema(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

fn read_error(path: &Path, e: ReadError) -> CliError {
    match e {
        ReadError::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        ReadError::Schema(errors) => {
            let lines: Vec<String> = errors.iter().map(|e| format!("{}:{e}", path.display())).collect();
            CliError::Schema(lines.join("\n"))
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file<T: serde::Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io)?;
    write_jsonl(BufWriter::new(file), records).map_err(io)
}

pub fn load_rig(path: &Path) -> Result<PanoramaRig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let rig: PanoramaRig =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    rig.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(rig)
}

#[derive(Debug, Parser)]
#[command(
    name = "panotrack",
    version,
    args_override_self = true,
    allow_negative_numbers = true,
    about = "Panoramic ground-plane localization and multi-person tracking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Place every detection on the ground plane (no identities).
    Localize(LocalizeArgs),
    /// Localize and track detections, writing identity-stamped tracklets.
    Track(TrackArgs),
    /// Score tracklets against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene: detections plus ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub rig: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the rig's assumed body height, meters.
    #[arg(long)]
    pub h_body: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub rig: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Matching cost threshold; a pair matches only if its cost is below this.
    #[arg(long, default_value_t = tracker::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Frames a track survives without a match.
    #[arg(long, default_value_t = tracker::DEFAULT_LIFESPAN)]
    pub lifespan: u32,
    /// Cross-view duplicate merge radius, meters (0 disables).
    #[arg(long, default_value_t = 0.0)]
    pub merge_radius: f64,
    /// Override the rig's assumed body height, meters.
    #[arg(long)]
    pub h_body: Option<f64>,
    /// Associate on trajectory cost alone.
    #[arg(long)]
    pub no_appearance: bool,
    /// Keep a moving average of track appearance with this weight on the old value.
    #[arg(long)]
    pub ema_beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Association gate between ground truth and predictions, meters.
    #[arg(long, default_value_t = 1.0)]
    pub dist_threshold: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,2.0")]
    pub loc_thresholds: Vec<f64>,
    /// Only score records within this distance of the rig center, meters.
    #[arg(long, default_value_t = 10.0)]
    pub radius: f64,
    /// Ignore tracklet points the tracker marked as estimated.
    #[arg(long)]
    pub observed_only: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene configuration JSON; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rig: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Localize(a) => cmd_localize(&a),
        Command::Track(a) => cmd_track(&a),
        Command::Eval(a) => cmd_eval(&a).map(|report| print!("{report}")),
        Command::Synth(a) => cmd_synth(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_localize(args: &LocalizeArgs) -> Result<(), CliError> {
    let mut rig = load_rig(&args.rig)?;
    if let Some(h) = args.h_body {
        rig = rig.with_body_height(h);
        rig.validate()?;
    }
    let detections = read_detections(open(&args.detections)?).map_err(|e| read_error(&args.detections, e))?;
    let pose = PoseParams::default();
    let mut out = Vec::with_capacity(detections.len());
    for (line, det) in &detections {
        match det.localize(&rig, &pose) {
            Ok(loc) => out.push(LocationRecord::from(&loc)),
            Err(e) => eprintln!("warning: {}:{line}: skipped: {e}", args.detections.display()),
        }
    }
    write_file(&args.out, out)
}

pub fn cmd_track(args: &TrackArgs) -> Result<(), CliError> {
    let rig = load_rig(&args.rig)?;
    let config = TrackerConfig {
        epsilon: args.epsilon,
        max_lifespan: args.lifespan,
        merge_radius_m: args.merge_radius,
        body_height_m: args.h_body.unwrap_or(rig.body_height_m),
        cost_mode: if args.no_appearance { CostMode::TrajectoryOnly } else { CostMode::Combined },
        appearance: match args.ema_beta {
            Some(beta) => AppearanceUpdate::Ema { beta },
            None => AppearanceUpdate::Latest,
        },
        ..TrackerConfig::default()
    };
    config.validate()?;

    let detections = read_detections(open(&args.detections)?).map_err(|e| read_error(&args.detections, e))?;
    let (lines, detections): (Vec<usize>, Vec<_>) = detections.into_iter().unzip();
    let frames = tracker::group_by_frame(detections)?;
    // line number of each (frame batch, index) for warnings
    let mut batch_lines = Vec::with_capacity(frames.len());
    let mut cursor = 0;
    for (frame, batch) in &frames {
        batch_lines.push((*frame, lines[cursor..cursor + batch.len()].to_vec()));
        cursor += batch.len();
    }

    let output = tracker::run(config, &rig, frames)?;
    for skip in &output.skipped {
        let line = batch_lines
            .iter()
            .find(|(f, _)| *f == skip.frame)
            .map(|(_, l)| l[skip.index])
            .unwrap_or_default();
        eprintln!("warning: {}:{line}: skipped: {}", args.detections.display(), skip.error);
    }
    write_file(&args.out, output.tracklets.iter().map(TrackletRecord::from))?;
    let s = output.stats;
    eprintln!(
        "frames: {}, tracks created: {}, tracks retired: {}, detections skipped: {}",
        s.frames,
        s.created,
        s.retired,
        output.skipped.len()
    );
    Ok(())
}

#[derive(Deserialize)]
struct PredictionLine {
    frame: u64,
    id: u64,
    x: f64,
    z: f64,
    #[serde(default)]
    estimated: bool,
}

/// Runs the evaluation and returns the rendered report.
pub fn cmd_eval(args: &EvalArgs) -> Result<String, CliError> {
    let gt: Vec<LabeledPoint> = read_jsonl::<GroundTruthRecord, _>(open(&args.gt)?)
        .map_err(|e| read_error(&args.gt, e))?
        .into_iter()
        .map(|(_, r)| r.into())
        .collect();
    let pred: Vec<LabeledPoint> = read_jsonl::<PredictionLine, _>(open(&args.pred)?)
        .map_err(|e| read_error(&args.pred, e))?
        .into_iter()
        .filter(|(_, r)| !(args.observed_only && r.estimated))
        .map(|(_, r)| LabeledPoint::new(r.frame, r.id, r.x, r.z))
        .collect();
    let params = EvalParams {
        dist_threshold_m: args.dist_threshold,
        loc_thresholds_m: args.loc_thresholds.clone(),
        eval_radius_m: args.radius,
    };
    let report = evaluate(&gt, &pred, &params)?;
    Ok(match args.format {
        ReportFormat::Table => report.table(),
        ReportFormat::Json => {
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))? + "\n"
        }
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SceneConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SceneConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let rig = load_rig(&args.rig)?;
    let scene = generate_scene(&config, &rig)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;
    write_file(
        &args.out_dir.join("detections.jsonl"),
        scene.detections.iter().map(|d| DetectionRecord::from_detection(&d.detection)),
    )?;
    write_file(
        &args.out_dir.join("ground_truth.jsonl"),
        scene.ground_truth.iter().map(GroundTruthRecord::from),
    )?;
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "wrote {} detections and {} ground-truth records to {}",
        scene.detections.len(),
        scene.ground_truth.len(),
        args.out_dir.display()
    );
    Ok(())
}
