//! `relax`: hypothesis checks, runs, sweeps and the acceptance report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit code when `check --strict` finds a failed hypothesis.
pub const EXIT_CHECK_FAILED: u8 = 2;
/// Exit code when an `--assert` flag finds a failed verdict.
pub const EXIT_ASSERT_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "relax", version, about = "Relaxation approximations of 1D balance laws")]
pub struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Where the run configuration comes from.
#[derive(Args, Debug, Clone)]
pub struct ConfigSource {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "system")]
    pub config: Option<PathBuf>,

    /// Builtin system with default settings.
    #[arg(long)]
    pub system: Option<String>,

    /// Overrides the configured relaxation parameter.
    #[arg(long)]
    pub eps: Option<f64>,

    /// Overrides the configured number of cells.
    #[arg(long)]
    pub cells: Option<usize>,

    /// Overrides the configured final time.
    #[arg(long)]
    pub t_end: Option<f64>,

    /// Output directory (default: `$RELAX_OUTPUT_ROOT/<command>-<system>-<hash>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Checks the structural hypotheses of a system and writes a JSON report.
    Check {
        #[arg(long)]
        system: String,
        /// Exit with status 2 when a required hypothesis fails.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u32,
        /// `suggest` for 2 alpha I, or a number c for c I.
        #[arg(long, default_value = "suggest")]
        a: String,
        /// Also require the conditions of the alternative model.
        #[arg(long)]
        alternative: bool,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the relaxation solver and writes snapshots and functionals.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Skip the equilibrium reference (no psi, lyapunov or error-term columns).
        #[arg(long)]
        no_reference: bool,
    },
    /// Well-prepared runs over a list of eps against one reference.
    SweepEps {
        #[command(flatten)]
        source: ConfigSource,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',', default_values_t = [4e-3, 2e-3, 1e-3, 5e-4])]
        eps_list: Vec<f64>,
        /// Exit with status 3 unless the fitted slope matches the checked route.
        #[arg(long)]
        assert: bool,
        /// Skip the refinement comparison that guards against a dx floor.
        #[arg(long)]
        no_floor_check: bool,
    },
    /// Manufactured travelling-wave runs over a list of cell counts.
    SweepDx {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256, 512])]
        cells_list: Vec<usize>,
        /// Speed of the manufactured wave.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Also tabulate the energy and relative-entropy identity residuals.
        #[arg(long)]
        identities: bool,
        /// Exit with status 3 unless the slope matches the design order.
        #[arg(long)]
        assert: bool,
    },
    /// Runs acceptance criteria and/or aggregates sweep summaries.
    Report {
        /// Comma-separated criterion ids (default: all, unless --inputs is given).
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
        /// Output directories of earlier sweeps to aggregate.
        #[arg(long, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Exit with status 3 when any criterion or aggregated verdict fails.
        #[arg(long)]
        assert: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
