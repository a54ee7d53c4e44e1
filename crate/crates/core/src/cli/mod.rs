//! Command-line front end for the full pipeline.
//!
//! Every command writes a [`RunManifest`] beside its primary output. Exit
//! codes: 0 success, 2 invalid input, 3 numerical abort.

mod commands;
pub mod manifest;
mod sweep;
pub mod trace_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

pub use manifest::{Artifact, FileHash, RunManifest};
pub use trace_io::{read_trace, write_trace, LoadedTrace};

use crate::data::{NoiseMode, PhantomKind};
use crate::denoise::ThresholdMode;
use crate::error::Error;
use crate::sampling::MaskMode;

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pvdamp", version, about = "Multi-coil variable density AMP reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic phantom.
    Phantom(PhantomArgs),
    /// Simulate normalized coil sensitivity maps.
    Coils(CoilsArgs),
    /// Build a density map and draw a Bernoulli mask from it.
    Mask(MaskArgs),
    /// Simulate noisy undersampled multi-coil k-space.
    Acquire(AcquireArgs),
    /// Run a reconstruction algorithm.
    Reconstruct(ReconstructArgs),
    /// NMSE, SSIM and HFEN against a reference.
    Evaluate(EvaluateArgs),
    /// Gaussianity of the normalized P-VDAMP error at every iteration.
    SeCheck(SeCheckArgs),
    /// Sweep SNR, acceleration or lambda over seeded scenarios; emits CSV.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ellipses,
    #[value(alias = "blobs_and_vessels")]
    BlobsAndVessels,
}

impl From<KindArg> for PhantomKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Ellipses => PhantomKind::Ellipses,
            KindArg::BlobsAndVessels => PhantomKind::BlobsAndVessels,
        }
    }
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    pub shape: Vec<usize>,
    #[arg(long, value_enum, default_value = "ellipses")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CoilsArgs {
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub n_coils: usize,
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    #[arg(long, default_value_t = 0.3)]
    pub phase_strength: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MaskModeArg {
    Points,
    Columns,
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    pub shape: Vec<usize>,
    /// Target acceleration factor.
    #[arg(long = "R")]
    pub accel: f64,
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    pub calib: Vec<usize>,
    #[arg(long, default_value_t = crate::sampling::DEFAULT_DECAY)]
    pub decay: f64,
    #[arg(long, default_value_t = crate::sampling::DEFAULT_P_MIN)]
    pub p_min: f64,
    #[arg(long, value_enum, default_value = "points")]
    pub mode: MaskModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub density_out: PathBuf,
}

impl From<MaskModeArg> for MaskMode {
    fn from(m: MaskModeArg) -> Self {
        match m {
            MaskModeArg::Points => MaskMode::Points,
            MaskModeArg::Columns => MaskMode::Columns,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseModeArg {
    Diagonal,
    Correlated,
}

impl From<NoiseModeArg> for NoiseMode {
    fn from(m: NoiseModeArg) -> Self {
        match m {
            NoiseModeArg::Diagonal => NoiseMode::Diagonal,
            NoiseModeArg::Correlated => NoiseMode::Correlated,
        }
    }
}

#[derive(Args, Debug)]
pub struct AcquireArgs {
    #[arg(long)]
    pub x0: PathBuf,
    #[arg(long)]
    pub coils: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub snr_db: f64,
    #[arg(long, value_enum, default_value = "diagonal")]
    pub noise_mode: NoiseModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// K-space output; the noise covariance is written to `<out>.noise`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Pvdamp,
    PvdampUnbiased,
    Fista,
    FistaOpt,
    SureIt,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Pvdamp => "pvdamp",
            Algo::PvdampUnbiased => "pvdamp-unbiased",
            Algo::Fista => "fista",
            Algo::FistaOpt => "fista-opt",
            Algo::SureIt => "sure-it",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    Tau,
    Flat,
}

impl From<ThresholdArg> for ThresholdMode {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::Tau => ThresholdMode::TauScaled,
            ThresholdArg::Flat => ThresholdMode::FlatPerBand,
        }
    }
}

/// Solver knobs shared by `reconstruct` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = crate::wavelet::DEFAULT_LEVELS)]
    pub levels: usize,
    /// P-VDAMP damping factor.
    #[arg(long, default_value_t = 0.75)]
    pub rho: f64,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative stopping tolerance (tau plateau or iterate change).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value = "tau")]
    pub threshold_mode: ThresholdArg,
    /// FISTA: reject steps that increase the objective.
    #[arg(long)]
    pub monotone: bool,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Sampling probabilities; required by the P-VDAMP variants.
    #[arg(long)]
    pub density: Option<PathBuf>,
    #[arg(long)]
    pub coils: PathBuf,
    /// Noise covariance; defaults to `<y>.noise` when that file exists.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Regularization weight; required by `fista`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ground truth for per-iteration NMSE; required by `fista-opt`.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub xhat: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundsArg {
    Strict,
    Relaxed,
}

#[derive(Args, Debug)]
pub struct SeCheckArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "relaxed")]
    pub bounds: BoundsArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    Snr,
    #[value(name = "R", alias = "r")]
    Accel,
    Lambda,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub vary: Vary,
    /// Values of the varied quantity.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
    pub seeds: Vec<u64>,
    /// Algorithms to run; ignored when varying lambda (FISTA only).
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["pvdamp", "sure-it", "fista-opt"])]
    pub algos: Vec<Algo>,
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [64usize, 64])]
    pub shape: Vec<usize>,
    #[arg(long = "R", default_value_t = 5.0)]
    pub accel: f64,
    #[arg(long, num_args = 2, value_names = ["H", "W"], default_values_t = [8usize, 8])]
    pub calib: Vec<usize>,
    #[arg(long, default_value_t = crate::sampling::DEFAULT_DECAY)]
    pub decay: f64,
    #[arg(long, default_value_t = crate::sampling::DEFAULT_P_MIN)]
    pub p_min: f64,
    #[arg(long, default_value_t = 4)]
    pub n_coils: usize,
    #[arg(long, default_value_t = 30.0)]
    pub snr_db: f64,
    #[arg(long, value_enum, default_value = "blobs-and-vessels")]
    pub kind: KindArg,
    /// Fixed lambda for `fista` when it is among the algorithms.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// One row per iteration (NMSE against elapsed time) instead of per run.
    #[arg(long)]
    pub per_iteration: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn configure_threads() {
    if let Some(n) = std::env::var("PVDAMP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Argument combinations clap cannot express; reported as usage errors.
fn check_usage(cli: &Cli) -> Result<(), clap::Error> {
    let usage = |msg: &str| Err(Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, msg));
    match &cli.command {
        Command::Reconstruct(a) => match a.algo {
            Algo::Fista if a.lambda.is_none() => usage("--algo fista requires --lambda"),
            Algo::FistaOpt if a.reference.is_none() => usage("--algo fista-opt requires --ref"),
            Algo::Pvdamp | Algo::PvdampUnbiased if a.density.is_none() => usage("P-VDAMP requires --density"),
            _ => Ok(()),
        },
        Command::Sweep(a) if a.vary != Vary::Lambda && a.algos.contains(&Algo::Fista) && a.lambda.is_none() => {
            usage("sweeping fista requires --lambda")
        }
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> crate::Result<()> {
    match cli.command {
        Command::Phantom(a) => commands::phantom(a),
        Command::Coils(a) => commands::coils(a),
        Command::Mask(a) => commands::mask(a),
        Command::Acquire(a) => commands::acquire(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SeCheck(a) => commands::se_check(a),
        Command::Sweep(a) => sweep::sweep(a),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// Parses `std::env::args`, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = check_usage(&cli) {
        e.exit();
    }
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
