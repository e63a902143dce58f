//! `radlabel` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Automatic LiDAR labelling and radar segmentation tooling.
#[derive(Debug, Parser)]
#[command(name = "radlabel", version, propagate_version = true)]
pub struct Cli {
    /// TOML config with [labelling], [grid], [eval] and [loss] tables.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads (frames and kernels). Defaults to all cores.
    #[arg(long, short = 'j', global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic frames with ground truth.
    Synth(SynthArgs),
    /// Label frame bundles: labeled cloud, label cube and per-point labels.
    Label(LabelArgs),
    /// Reduce a RAED tensor to the RAE cube.
    Rae(RaeArgs),
    /// Rasterize a labeled radar-frame cloud into a label cube.
    Voxelize(VoxelizeArgs),
    /// Compare predictions with ground truth (cubes or labeled clouds).
    Eval(EvalArgs),
    /// Render a label cube as a bird's-eye PPM image.
    Render(RenderArgs),
    /// Check loss gradients against finite differences.
    Losscheck(LosscheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene seed; with --frames, the first of consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of frames.
    #[arg(long, default_value_t = 1)]
    pub frames: u64,
    /// Scene description (TOML) instead of a random scene.
    #[arg(long, value_name = "PATH")]
    pub scene: Option<PathBuf>,
    /// Also emit a synthetic RAED tensor.
    #[arg(long)]
    pub raed: bool,
    /// Output directory.
    #[arg(long, short, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Frame bundle files.
    #[arg(required = true, value_name = "BUNDLE")]
    pub bundles: Vec<PathBuf>,
    /// Output directory; per-frame subdirectories when labelling several
    /// bundles. Defaults to each bundle's directory.
    #[arg(long, short, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RaeArgs {
    /// Power channel (f32 tensor).
    pub power: PathBuf,
    /// Elevation-index channel (i32 tensor).
    pub elevation: PathBuf,
    #[arg(long, short, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// Labeled point cloud in the radar frame.
    pub cloud: PathBuf,
    #[arg(long, short, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted cube or labeled cloud; repeat for several frames.
    #[arg(long, required = true, value_name = "PATH")]
    pub pred: Vec<PathBuf>,
    /// Ground truth matching each --pred.
    #[arg(long, required = true, value_name = "PATH")]
    pub gt: Vec<PathBuf>,
    /// Write one JSON record per frame plus a summary record.
    #[arg(long, value_name = "PATH")]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub cube: PathBuf,
    #[arg(long, short, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Channels, range, azimuth and elevation bins of each instance.
    #[arg(long, value_delimiter = ',', default_values_t = [5, 3, 2, 2])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation: exit 1.
    Usage(String),
    /// Unreadable, inconsistent or failing data: exit 2.
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
