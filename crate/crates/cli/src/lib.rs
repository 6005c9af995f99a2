//! Batch frontend for the segmentation pipeline. Each subcommand runs one
//! stage (or the whole pipeline) and writes its artifacts atomically.
//!
//! Exit codes: 0 success, 1 error (one diagnostic line on stderr), 2 ran
//! fine but nothing anomalous was found.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use tumorseg::imgio::{encode_gray_pgm, encode_mask_pgm, load_gray_pgm, load_mask_pgm, render_overlay};
use tumorseg::phantom::{generate, PhantomSpec};
use tumorseg::pipeline::{evaluate, segment};
use tumorseg::preprocess::{diffuse, skull_strip};
use tumorseg::{BinaryMask, FbbResult, Neighborhood, PipelineConfig, Side};

pub use config::{merge_into, parse_config};
use output::Outputs;

#[derive(Parser, Debug)]
#[command(name = "tumorseg", version, about = "Symmetry-driven anomaly segmentation for 2-D head scans")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline: strip, denoise, localize, train, classify.
    Segment(SegmentArgs),
    /// Anisotropic diffusion only.
    Diffuse(DiffuseArgs),
    /// Head mask plus bounding-box search on the given image.
    Fbb(StageArgs),
    /// Compare a predicted mask against a truth mask.
    Metrics(MetricsArgs),
    /// Write a synthetic head phantom with its truth masks.
    Phantom(PhantomArgs),
}

#[derive(Args, Debug)]
struct StageArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON or key=value file; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for the parallel loops (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Diffusion neighborhood, 4 or 8.
    #[arg(long, value_parser = parse_neighborhood)]
    neighborhood: Option<Neighborhood>,
    /// Seed for training-set subsampling.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DiffuseArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long, value_parser = parse_neighborhood)]
    neighborhood: Option<Neighborhood>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Predicted mask.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Pixels to score (default: the whole raster).
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Spec overrides; `preset = standard | symmetric | random` picks the base.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_neighborhood(s: &str) -> Result<Neighborhood, String> {
    s.parse::<u32>()
        .ok()
        .and_then(Neighborhood::from_count)
        .ok_or_else(|| format!("neighborhood must be 4 or 8, got {s:?}"))
}

/// Outcome of a subcommand that did not fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NothingFound,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            // Keep the diagnostic on one line; the usage block is dropped.
            let msg = e.to_string();
            let summary: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
                .collect();
            eprintln!("{}", summary.join(" "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NothingFound) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", e.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<Status, String> {
    let jobs = match &cli.command {
        Command::Segment(a) => a.stage.jobs,
        Command::Diffuse(a) => a.stage.jobs,
        Command::Fbb(a) => a.jobs,
        _ => None,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err("--jobs must be at least 1".into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| e.to_string())?;
    pool.install(|| match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Diffuse(a) => cmd_diffuse(a),
        Command::Fbb(a) => cmd_fbb(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Phantom(a) => cmd_phantom(a),
    })
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn load_overrides(path: Option<&Path>) -> Result<Map<String, Value>, String> {
    path.map_or_else(|| Ok(Map::new()), config::read_config)
}

/// Pipeline configuration plus the optional `truth` and `domain` mask paths.
fn pipeline_config(path: Option<&Path>) -> Result<(PipelineConfig, Option<String>, Option<String>), String> {
    let mut map = load_overrides(path)?;
    let truth = config::take_path(&mut map, "truth")?;
    let domain = config::take_path(&mut map, "domain")?;
    let cfg = merge_into(&PipelineConfig::default(), map)?;
    cfg.validate().map_err(err)?;
    Ok((cfg, truth, domain))
}

/// Relative paths inside a config file resolve against the file's directory.
fn resolve(config: Option<&Path>, p: &str) -> PathBuf {
    let p = Path::new(p);
    match config.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

#[derive(Serialize)]
struct BoxJson {
    row_min: Option<usize>,
    row_max: Option<usize>,
    col_min: Option<usize>,
    col_max: Option<usize>,
    side: Side,
    found: bool,
    axis_col: f64,
    inside_dissimilarity: f64,
}

fn box_json(res: &FbbResult) -> Result<String, String> {
    let b = res.bbox;
    serde_json::to_string_pretty(&BoxJson {
        row_min: b.map(|b| b.row_min),
        row_max: b.map(|b| b.row_max),
        col_min: b.map(|b| b.col_min),
        col_max: b.map(|b| b.col_max),
        side: res.side,
        found: res.found,
        axis_col: res.axis_col,
        inside_dissimilarity: res.inside_dissimilarity,
    })
    .map_err(err)
}

fn cmd_segment(a: SegmentArgs) -> Result<Status, String> {
    let cfg_path = a.stage.config.as_deref();
    let (mut cfg, truth, domain) = pipeline_config(cfg_path)?;
    if let Some(n) = a.neighborhood {
        cfg.diffusion.neighborhood = n;
    }
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    let image = load_gray_pgm(&a.stage.input).map_err(err)?;
    let truth = truth
        .map(|p| load_mask_pgm(resolve(cfg_path, &p)))
        .transpose()
        .map_err(err)?;
    let domain = domain
        .map(|p| load_mask_pgm(resolve(cfg_path, &p)))
        .transpose()
        .map_err(err)?;

    let out = segment(&image, &cfg).map_err(err)?;
    let mut files = Outputs::default();
    files.add("mask.pgm", encode_mask_pgm(&out.mask));
    let overlay = render_overlay(&image, &out.mask, out.fbb.bbox.as_ref()).map_err(err)?;
    files.add("overlay.pgm", encode_gray_pgm(&overlay).map_err(err)?);
    if let Some(model) = &out.model {
        files.add_json("model.json", model.to_json().map_err(err)?);
    }
    files.add_json("box.json", box_json(&out.fbb)?);
    if let Some(truth) = truth {
        let domain = domain.unwrap_or_else(|| out.head.mask.clone());
        let report = evaluate(&out.mask, &truth, &domain).map_err(err)?;
        files.add_json("metrics.json", report.to_json().map_err(err)?);
    }
    files.commit(&a.stage.out)?;
    Ok(if out.fbb.found { Status::Done } else { Status::NothingFound })
}

fn cmd_diffuse(a: DiffuseArgs) -> Result<Status, String> {
    let (mut cfg, _, _) = pipeline_config(a.stage.config.as_deref())?;
    if let Some(n) = a.neighborhood {
        cfg.diffusion.neighborhood = n;
    }
    let image = load_gray_pgm(&a.stage.input).map_err(err)?;
    let smoothed = diffuse(&image, &cfg.diffusion).map_err(err)?;
    let mut files = Outputs::default();
    files.add("denoised.pgm", encode_gray_pgm(&smoothed).map_err(err)?);
    files.commit(&a.stage.out)?;
    Ok(Status::Done)
}

fn cmd_fbb(a: StageArgs) -> Result<Status, String> {
    let (cfg, _, _) = pipeline_config(a.config.as_deref())?;
    let image = load_gray_pgm(&a.input).map_err(err)?;
    let head = skull_strip(&image).map_err(err)?;
    let res = tumorseg::fbb::find_bounding_box(&head.stripped, &head.mask, &cfg.fbb_params()).map_err(err)?;
    let mut files = Outputs::default();
    files.add_json("box.json", box_json(&res)?);
    let empty = BinaryMask::empty(image.width(), image.height()).map_err(err)?;
    let overlay = render_overlay(&image, &empty, res.bbox.as_ref()).map_err(err)?;
    files.add("overlay.pgm", encode_gray_pgm(&overlay).map_err(err)?);
    files.commit(&a.out)?;
    Ok(if res.found { Status::Done } else { Status::NothingFound })
}

fn cmd_metrics(a: MetricsArgs) -> Result<Status, String> {
    let predicted = load_mask_pgm(&a.input).map_err(err)?;
    let truth = load_mask_pgm(&a.truth).map_err(err)?;
    let domain = match &a.domain {
        Some(p) => load_mask_pgm(p).map_err(err)?,
        None => BinaryMask::full(predicted.width(), predicted.height()).map_err(err)?,
    };
    let report = evaluate(&predicted, &truth, &domain).map_err(err)?;
    let mut files = Outputs::default();
    files.add_json("metrics.json", report.to_json().map_err(err)?);
    files.commit(&a.out)?;
    Ok(Status::Done)
}

fn cmd_phantom(a: PhantomArgs) -> Result<Status, String> {
    let mut map = load_overrides(a.config.as_deref())?;
    let preset = config::take_path(&mut map, "preset")?.unwrap_or_else(|| "standard".into());
    let seed = a.seed.unwrap_or(0);
    let base = match preset.as_str() {
        "standard" => PhantomSpec::standard(seed),
        "symmetric" => PhantomSpec::symmetric(seed),
        "random" => PhantomSpec::random_lesion(seed),
        other => return Err(format!("unknown preset {other:?} (standard, symmetric, random)")),
    };
    let spec: PhantomSpec = merge_into(&base, map)?;
    let p = generate(&spec).map_err(err)?;
    let mut files = Outputs::default();
    files.add("image.pgm", encode_gray_pgm(&p.image).map_err(err)?);
    files.add("head.pgm", encode_mask_pgm(&p.head_truth));
    files.add("truth.pgm", encode_mask_pgm(&p.lesion_truth));
    files.add_json("spec.json", serde_json::to_string_pretty(&spec).map_err(err)?);
    if let Some(b) = p.lesion_truth.bounding_box() {
        files.add_json("truth_box.json", serde_json::to_string_pretty(&b).map_err(err)?);
    }
    files.commit(&a.out)?;
    Ok(Status::Done)
}
