//! The `stig` command line: training, refinement, analysis curves, set
//! metrics, detector experiments and synthetic data generation.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{EmbedderKind, RunConfig};
pub use error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "stig", version, about = "Frequency-domain refinement of generated images")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the refinement networks on the configured real and fake sets.
    Train(TrainArgs),
    /// Refine a directory of images with a trained checkpoint.
    Refine(RefineArgs),
    /// Emit analysis curves and spectra.
    Analyze(AnalyzeArgs),
    /// FID and LFD of fake (and refined) sets against a real set.
    Metrics(MetricsArgs),
    /// Train a spectrum detector and report its confusion on refined images.
    Detector(DetectorArgs),
    /// Generate synthetic image sets.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Continue from a checkpoint instead of a fresh initialization.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Save an intermediate checkpoint every N steps.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Also write refined spectra to `spectra.npz`.
    #[arg(long)]
    pub spectra: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Denoising-filter magnitude profile.
    #[arg(long)]
    pub wiener: bool,
    /// Cumulative ᾱ values for `--wiener`; defaults to a linear-β schedule sweep.
    #[arg(long, value_delimiter = ',')]
    pub alpha_bar: Vec<f64>,
    /// Frequency samples (cycles per image) for `--wiener`.
    #[arg(long, default_value_t = 64)]
    pub freq_samples: usize,
    #[arg(long, default_value_t = 32.0)]
    pub max_freq: f64,
    /// Stop-band ripple of windowed sinc kernels.
    #[arg(long)]
    pub sinc: bool,
    #[arg(long, default_value_t = 0.25)]
    pub cutoff: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 9, 17, 33, 65])]
    pub sizes: Vec<usize>,
    /// Chessboard profiles of the images in `--input`.
    #[arg(long)]
    pub ci: bool,
    /// Averaged spectrum PNG and CSV of `--input`.
    #[arg(long)]
    pub avg_spectrum: bool,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Image size used when loading `--input`.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub fake: PathBuf,
    #[arg(long)]
    pub refined: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub fake: PathBuf,
    /// Refined fakes evaluated against the trained detector.
    #[arg(long)]
    pub refined: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum ArchArg {
    ShallowCnn,
    VitB16,
    VitSmall,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub mode: SynthModeArg,
    /// Source images for the artifact modes.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of images for `dead_leaves`.
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long)]
    pub alpha_bar: Option<f64>,
    #[arg(long)]
    pub factor: Option<usize>,
    #[arg(long)]
    pub imbalance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SynthModeArg {
    CheckerboardUpsample,
    HighfreqSuppress,
    /// Natural-statistics occlusion images.
    DeadLeaves,
}

/// Runs one parsed invocation. `argv` is stored in the run record.
pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    commands::dispatch(cli, argv)
}
