//! `pqsdepth`: bound tables, curves, depth certification and the synthetic
//! measurement pipeline from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pqs_depth::criteria::CriterionKind;
use pqs_depth::SpinLabel;

use crate::output::UsageError;

#[derive(Parser, Debug)]
#[command(name = "pqsdepth", version, about = "Entanglement depth from planar spin squeezing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Curve cache directory; falls back to $PQSDEPTH_CACHE_DIR.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ZetaChoice {
    /// Solve for every entry.
    Computed,
    /// Literature table (integer J <= 27).
    Published,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Obs1Hull,
    LinearZeta,
    SorensenMolmer,
    HeK1,
}

impl From<CriterionArg> for CriterionKind {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Obs1Hull => CriterionKind::Obs1Hull,
            CriterionArg::LinearZeta => CriterionKind::LinearZeta,
            CriterionArg::SorensenMolmer => CriterionKind::SorensenMolmer,
            CriterionArg::HeK1 => CriterionKind::HeK1,
        }
    }
}

/// Where the `zeta^2_J` constants come from.
#[derive(Args, Debug, Clone)]
pub struct ZetaOpts {
    #[arg(long, value_enum, default_value_t = ZetaChoice::Computed)]
    pub zeta_source: ZetaChoice,
    /// Read the table from a CSV written by `zeta-table` instead.
    #[arg(long, conflicts_with = "zeta_source")]
    pub zeta_table: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CriterionOpts {
    #[arg(long, value_enum, default_value_t = CriterionArg::LinearZeta)]
    pub criterion: CriterionArg,
    /// Largest group size tested.
    #[arg(long, default_value_t = 10)]
    pub k_max: u32,
    /// Strict-inequality margin on normalized quantities.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[command(flatten)]
    pub zeta: ZetaOpts,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimal planar squeezing parameter zeta^2_J for J = 1..j-max (CSV `J,zeta_squared`).
    ZetaTable {
        /// Largest J; 0 writes an empty table.
        #[arg(long, default_value = "27")]
        j_max: SpinLabel,
        /// Also list half-integer J.
        #[arg(long)]
        half_integer: bool,
        #[arg(long, value_enum, default_value_t = ZetaChoice::Computed)]
        zeta_source: ZetaChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower bound on the normalized variance sum for k-producible states of spin-j particles.
    BoundCurve {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        j: SpinLabel,
        /// Resample the CSV output on this many uniform X values.
        #[arg(long)]
        samples: Option<usize>,
        /// `.json` writes the full curve with metadata; anything else writes CSV `X,value`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orthogonal-variance bound F_J for a single block.
    SmCurve {
        #[arg(long = "J", alias = "big-j")]
        spin: SpinLabel,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified entanglement depth of measured moments (JSON object or array).
    Depth {
        #[arg(long)]
        moments: PathBuf,
        #[command(flatten)]
        criteria: CriterionOpts,
    },
    /// Planar vs orthogonal-variance bound on an (alpha, beta) grid.
    Compare {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        j: SpinLabel,
        /// `start:stop:count`, log-spaced.
        #[arg(long, default_value = "0.01:100:50")]
        alpha_grid: String,
        /// `start:stop:count`, linear; stop may not exceed j. Default `j/count .. j`.
        #[arg(long)]
        beta_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic measurement run (records CSV plus JSON sidecar).
    Simulate {
        /// Generator settings as JSON; the calibrated defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Shots per group, overriding the configuration.
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyze a recorded run: per photon number, squeezing, depth and fractions.
    Analyze {
        /// Records CSV, or a directory holding `run.csv`.
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        criteria: CriterionOpts,
        #[arg(long, default_value_t = 500)]
        bootstrap: usize,
        #[arg(long, default_value_t = 3)]
        min_shots: usize,
        /// Bootstrap seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report table `N_L,xi_sq,depth,f_2,...`.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<pqs_depth::Error>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
