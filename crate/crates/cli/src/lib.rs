//! `forestmfg` command-line interface.
//!
//! Exit codes: 0 on success, 2 for input or validation errors, 3 when an
//! iterative method fails to converge.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NonConvergence(_) => EXIT_NON_CONVERGENCE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::NonConvergence(m) => write!(f, "did not converge: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<forestmfg_core::Error> for CliError {
    fn from(e: forestmfg_core::Error) -> Self {
        if e.is_non_convergence() {
            CliError::NonConvergence(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "forestmfg", version, about = "Mean-field-game deforestation model toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags take precedence over its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed for every randomized step [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for result files [default: current directory].
    #[arg(long, global = true, env = "FORESTMFG_OUTPUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary (and optionally finite-horizon) equilibrium policy.
    Equilibrium(EquilibriumArgs),
    /// Simulate forest cover under an equilibrium rate.
    Simulate(SimulateArgs),
    /// Forest cover with and without adherence over a panel.
    Counterfactual(CounterfactualArgs),
    /// Beta MLE of adherence shares.
    FitBeliefs(FitBeliefsArgs),
    /// Drift and volatility from an untouched-forest panel.
    FitGbm(FitGbmArgs),
    /// GMM estimate of the CRRA curvature.
    FitGamma(FitGammaArgs),
    /// Build the exposure instrument.
    Instrument(InstrumentArgs),
    /// Full calibrated pipeline on the bundled synthetic data.
    Demo,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Model parameters JSON [default: calibrated set].
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Beta prior JSON [default: calibrated prior].
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Adherence grid size [default: 101].
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Also solve the finite-horizon problem over this many years.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Time grid size for the finite-horizon problem [default: 101].
    #[arg(long)]
    pub time_points: Option<usize>,
    /// Fixed-point tolerance for the finite-horizon problem [default: 1e-10].
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Adherence whose equilibrium rate drives the path [default: 0].
    #[arg(long)]
    pub adherence: Option<f64>,
    /// Extraction rate; overrides --adherence.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Initial cover, km² [default: 50].
    #[arg(long)]
    pub x0: Option<f64>,
    /// Years to simulate [default: 50].
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Step, years [default: 1].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Reflecting upper bound on cover.
    #[arg(long)]
    pub cap: Option<f64>,
    /// Number of independent endpoints to draw [default: 1].
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Panel CSV: unit_id,year,tree_area_km2,atr_share.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// [default: 1992]
    #[arg(long)]
    pub base_year: Option<i32>,
    /// [default: 2013]
    #[arg(long)]
    pub end_year: Option<i32>,
}

#[derive(Debug, Args)]
pub struct FitBeliefsArgs {
    /// CSV with an `atr_share` column.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitGbmArgs {
    /// Panel CSV of untouched areas.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Cluster-bootstrap replications [default: 3000].
    #[arg(long)]
    pub n_boot: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MomentsArg {
    Mean,
    MeanAndVariance,
}

#[derive(Debug, Args)]
pub struct FitGammaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Panel CSV with adherence shares.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Exponent of g2 = a^k [default: from --params, else 1].
    #[arg(long)]
    pub k: Option<f64>,
    /// [default: mean]
    #[arg(long, value_enum)]
    pub moments: Option<MomentsArg>,
    /// Brent tolerance on gamma [default: 1e-9].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Full,
    NoHd,
    NoRp,
}

#[derive(Debug, Args)]
pub struct InstrumentArgs {
    /// unit_id,lat,lon,language_nodes
    #[arg(long, value_name = "FILE")]
    pub units: Option<PathBuf>,
    /// name,lat,lon,freq_mhz,erp_dbm,year_active
    #[arg(long, value_name = "FILE")]
    pub transmitters: Option<PathBuf>,
    /// year,pentecostal_count,land_area_km2
    #[arg(long, value_name = "FILE")]
    pub density: Option<PathBuf>,
    /// Linguistic-distance exponent [default: 0.5].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Reception floor, dBm [default: -90].
    #[arg(long, allow_negative_numbers = true)]
    pub floor_dbm: Option<f64>,
    /// [default: full]
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Reference latitude for the distance term [default: 7.7].
    #[arg(long, allow_negative_numbers = true)]
    pub homeland_lat: Option<f64>,
    /// Reference longitude for the distance term [default: 4.0].
    #[arg(long, allow_negative_numbers = true)]
    pub homeland_lon: Option<f64>,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    init_logging(cli.global.verbose);
    match commands::execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}
