//! Command-line front end: argument parsing, run manifests and the
//! subcommand implementations behind the `irst` binary.

pub mod commands;
pub mod frames;
pub mod manifest;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "irst", version, about = "Single-frame infrared small-target detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect targets in one PGM frame or a directory of frames.
    Detect(DetectArgs),
    /// Write the MGD saliency map of a frame.
    Mgd(MgdArgs),
    /// Write the response map of a classical baseline detector.
    Baseline(BaselineArgs),
    /// Render a synthetic sequence with ground truth.
    Synth(SynthArgs),
    /// Per-frame SCR, SCR gain report for a set of maps.
    Eval(EvalArgs),
    /// ROC curve of a directory of maps against ground truth.
    Roc(RocArgs),
    /// Dump ring kernels as text grids.
    Rings(RingsArgs),
    /// Re-run the invocation recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Detector config (`key = value`); defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dets: PathBuf,
    /// Directory for intermediate maps and per-candidate diagnostics.
    #[arg(long)]
    pub dump_maps: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapOutput {
    /// Input PGM or directory of PGMs.
    #[arg(long)]
    pub input: PathBuf,
    /// Normalised PGM, or a directory when the input is one.
    #[arg(long)]
    pub out: PathBuf,
    /// Raw values as `x,y,value` CSV (a directory for directory input).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MgdArgs {
    #[command(flatten)]
    pub io: MapOutput,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Tophat,
    Maxmedian,
    Dog,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub io: MapOutput,
    /// Top-Hat structuring element side.
    #[arg(long, default_value_t = 5)]
    pub se_side: usize,
    /// Max-Median line length.
    #[arg(long, default_value_t = 5)]
    pub win: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 2.5)]
    pub sigma2: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Input PGM or directory of PGMs.
    #[arg(long)]
    pub input: PathBuf,
    /// Map file or directory (CSV or PGM), matched to inputs by frame id.
    #[arg(long)]
    pub maps: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value = "map")]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Only map files whose stem ends with this suffix.
    #[arg(long, default_value = "")]
    pub suffix: String,
    #[arg(long, default_value_t = irst_core::eval::DEFAULT_TARGET_SIDE)]
    pub target_side: usize,
    #[arg(long, default_value_t = irst_core::eval::DEFAULT_BG_WIDTH)]
    pub bg_width: usize,
}

#[derive(Args, Debug)]
pub struct RocArgs {
    #[arg(long)]
    pub maps_dir: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Only map files whose stem ends with this suffix.
    #[arg(long, default_value = "")]
    pub suffix: String,
    /// Quantile levels of the threshold sweep.
    #[arg(long, default_value_t = irst_core::eval::DEFAULT_ROC_LEVELS)]
    pub levels: usize,
}

#[derive(Args, Debug)]
pub struct RingsArgs {
    #[arg(long, default_value_t = 4)]
    pub max_radius: u32,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Worker count from `IRST_THREADS`; unset or 0 lets rayon decide.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("IRST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("IRST_THREADS must be a non-negative integer, got `{raw}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

/// Parses `args` (without the program name) and runs the subcommand on the
/// current rayon pool.
pub fn run_args(args: &[String]) -> Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("irst".to_string()).chain(args.iter().cloned()))
        .map_err(|e| anyhow::anyhow!("{}", e.to_string().trim()))?;
    commands::run(cli.command, args)
}
