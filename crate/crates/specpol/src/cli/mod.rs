//! Command-line surface.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "specpol", version, about = "Spectral-polarimetric diffractive imaging simulator")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the PSF stack of a radial height profile.
    Psf(PsfArgs),
    /// Simulate RGB sensor measurements of a scene.
    Encode(EncodeArgs),
    /// Reconstruct a spectral or Stokes cube from measurements.
    Decode(DecodeArgs),
    /// Design a height profile by gradient descent.
    Optimize(OptimizeArgs),
    /// Compare two spectral cubes.
    Metrics(MetricsArgs),
    /// Synthesize an RGB preview of a cube.
    Render(RenderArgs),
    /// Write a synthetic test scene.
    GenScene(GenSceneArgs),
    /// Write a radial height profile.
    GenProfile(GenProfileArgs),
    /// Export the spectrum of one pixel as CSV.
    Spectrum(SpectrumArgs),
    /// Convert a third-party cube to the native format.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct PsfArgs {
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Kernel size; overrides `element.crop`.
    #[arg(long)]
    pub crop: Option<usize>,
    /// Preview directory (default: `<out>_previews`).
    #[arg(long)]
    pub previews: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// NONE, GAUSSIAN or POISSON_GAUSSIAN; overrides `noise.kind`.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub peak: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Spectral cube, or Stokes cube with `--four`.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub psf: PathBuf,
    /// Response CSV (default: config, then the built-in curves).
    #[arg(long)]
    pub response: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Acquire the four analyzer frames and write a manifest.
    #[arg(long)]
    pub four: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["measurement", "manifest"])))]
pub struct DecodeArgs {
    #[arg(long)]
    pub measurement: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// PSF stack (default: the one referenced by the manifest).
    #[arg(long)]
    pub psf: Option<PathBuf>,
    /// Response CSV for a single measurement.
    #[arg(long)]
    pub response: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Band of the DoLP/AoLP maps (default: middle band).
    #[arg(long)]
    pub band: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// RESPONSE_WEIGHTED or CHANNEL_MEAN.
    #[arg(long)]
    pub fusion: Option<String>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of training cubes.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Starting profile; overrides `optimize.initial`.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference cube.
    #[arg(long)]
    pub a: PathBuf,
    /// Estimate.
    #[arg(long)]
    pub b: PathBuf,
    /// PSNR peak (default: reference maximum).
    #[arg(long)]
    pub peak: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// 8 or 16.
    #[arg(long, default_value_t = 8)]
    pub bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    Checker,
    PolarTarget,
    Circular,
    Unpolarized,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    #[arg(long, value_enum)]
    pub kind: SceneKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    /// Wavelength grid comes from here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checker patch rows.
    #[arg(long, default_value_t = 4)]
    pub rows: usize,
    /// Checker patch columns.
    #[arg(long, default_value_t = 6)]
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    Flat,
    Random,
    Focusing,
}

#[derive(Debug, Args)]
pub struct GenProfileArgs {
    #[arg(long, value_enum)]
    pub kind: ProfileKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Ring count and depth come from `element`, optics from `optics`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Height of a flat profile in metres.
    #[arg(long, default_value_t = 0.0)]
    pub height: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Design wavelength of a focusing profile.
    #[arg(long, default_value_t = 550.0)]
    pub design_nm: f64,
    /// Quantize to `element.levels`.
    #[arg(long)]
    pub quantize: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub row: usize,
    #[arg(long)]
    pub col: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestFormat {
    MatrixText,
    PngStack,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Text file or PNG directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: IngestFormat,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))?;
    }
    match cli.command {
        Command::Psf(a) => commands::psf(a),
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Render(a) => commands::render(a),
        Command::GenScene(a) => commands::gen_scene(a),
        Command::GenProfile(a) => commands::gen_profile(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Ingest(a) => commands::ingest(a),
    }
}
