use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ramsey_core::experiments::{Fig1Regime, DEFAULT_TOL};
use ramsey_core::Picture;

#[derive(Parser, Debug)]
#[command(
    name = "ramsey-thermo",
    version,
    about = "Heat and work fluxes of an atom crossing a driven leaky cavity",
    propagate_version = true
)]
pub struct Cli {
    /// File of `key = value` lines used as flag defaults; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Time series in one of the two limiting regimes
    Fig1(Fig1Args),
    /// Entropy and fluxes at t* across a coupling sweep
    Fig2(Fig2Args),
    /// Photon flux up to t* across a coupling sweep at eps = kappa
    Fig3(Fig3Args),
    /// Custom evolution sampled on a uniform time grid
    Evolve(EvolveArgs),
    /// Effective-model coupling where heat and work fluxes match
    Crossing(CrossingArgs),
    /// Drive strength above which the fluxes never cross
    CriticalDrive(CriticalDriveArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fig1(_) => "fig1",
            Command::Fig2(_) => "fig2",
            Command::Fig3(_) => "fig3",
            Command::Evolve(_) => "evolve",
            Command::Crossing(_) => "crossing",
            Command::CriticalDrive(_) => "critical-drive",
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

pub fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v <= 0.0 {
        return Err(format!("must be > 0, got {v}"));
    }
    Ok(v)
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v < 0.0 {
        return Err(format!("must be >= 0, got {v}"));
    }
    Ok(v)
}

pub fn tolerance(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !(1e-12..=1e-4).contains(&v) {
        return Err(format!("must lie in [1e-12, 1e-4], got {v}"));
    }
    Ok(v)
}

fn cutoff(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|_| format!("'{s}' is not a non-negative integer"))?;
    if !(1..=60).contains(&n) {
        return Err(format!("must lie in [1, 60], got {n}"));
    }
    Ok(n)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|_| format!("'{s}' is not a non-negative integer"))?;
    if n < 2 {
        return Err(format!("must be >= 2, got {n}"));
    }
    Ok(n)
}

/// Flags shared by every pipeline that writes files.
#[derive(Args, Debug, Clone)]
pub struct RunOpts {
    /// Integrator tolerance (absolute and relative)
    #[arg(long, default_value_t = DEFAULT_TOL, value_parser = tolerance)]
    pub tol: f64,

    /// Initial Fock cutoff
    #[arg(long, default_value_t = 15, value_parser = cutoff)]
    pub n_max: usize,

    /// Skip the n_max vs n_max + 5 comparison
    #[arg(long)]
    pub no_gate: bool,

    /// Worker threads for sweeps
    #[arg(
        long,
        env = "RAMSEY_THERMO_WORKERS",
        default_value_t = 1,
        value_parser = clap::value_parser!(u32).range(1..=1024)
    )]
    pub workers: u32,

    /// Output directory, created if absent
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,

    /// Also write an SVG plot next to the CSV
    #[arg(long)]
    pub svg: bool,

    /// Replace existing output files
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Args, Debug, Clone)]
pub struct GridOpts {
    /// Number of log-spaced couplings
    #[arg(long, default_value_t = 60, value_parser = at_least_two)]
    pub grid_points: usize,

    /// Smallest g/kappa
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub g_min: f64,

    /// Largest g/kappa
    #[arg(long, default_value_t = 1e2, value_parser = positive)]
    pub g_max: f64,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct Fig1Args {
    /// b_d (g = 1e-3, eps = 1) or c_e (g = 1, eps = 1e-3)
    #[arg(long)]
    pub regime: Fig1Regime,

    /// Uniform samples over [0, gt_max]
    #[arg(long, default_value_t = ramsey_core::experiments::FIG1_SAMPLES, value_parser = at_least_two)]
    pub samples: usize,

    /// End of the plotted range in units of 1/g
    #[arg(long, default_value_t = std::f64::consts::TAU, value_parser = positive)]
    pub gt_max: f64,

    /// Include the two fluxes in the SVG
    #[arg(long)]
    pub svg_fluxes: bool,

    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct Fig2Args {
    /// Drive amplitude eps/kappa
    #[arg(long, value_parser = positive)]
    pub eps: f64,

    #[command(flatten)]
    pub grid: GridOpts,

    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct Fig3Args {
    #[command(flatten)]
    pub grid: GridOpts,

    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct EvolveArgs {
    /// Coupling g
    #[arg(long, value_parser = non_negative)]
    pub g: f64,

    /// Drive amplitude eps
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub eps: f64,

    /// Cavity decay rate
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub kappa: f64,

    /// Atomic decay rate
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub gamma: f64,

    /// rotating-lab, displaced or effective-atom
    #[arg(long, default_value = "displaced")]
    pub picture: Picture,

    /// Final time
    #[arg(long, value_parser = positive)]
    pub t_end: f64,

    /// Uniform samples over [0, t_end]
    #[arg(long, default_value_t = 201, value_parser = at_least_two)]
    pub samples: usize,

    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct CrossingArgs {
    /// Drive amplitude eps/kappa
    #[arg(long, value_parser = positive)]
    pub eps: f64,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct CriticalDriveArgs {
    /// Drive with a flux crossing
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub lo: f64,

    /// Drive without a flux crossing
    #[arg(long, default_value_t = 1.2, value_parser = positive)]
    pub hi: f64,

    #[command(flatten)]
    pub grid: GridOpts,

    #[command(flatten)]
    pub run: RunOpts,
}
