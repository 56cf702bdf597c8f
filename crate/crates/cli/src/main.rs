use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chks_cli::commands::{cmd_check, cmd_run, cmd_sweep, cmd_wsu};
use chks_cli::config::benchmark_toml;
use chks_core::checks::Mutation;

/// Cahn–Hilliard / Keller–Segel chemotaxis simulator.
///
/// Exit codes: 0 success, 1 invalid config or I/O error, 2 aborted run,
/// failed sweep cell or failed check, 3 paired-run verdict FAIL.
/// Relative output directories are placed under $CHKS_OUTPUT_ROOT when set.
#[derive(Parser)]
#[command(name = "chks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a fine/coarse pair and evaluate the relative energy.
    Wsu {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of overrides, one directory per cell.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...` with a dotted key, e.g. `model.chi=0,1,2`.
        #[arg(long = "set")]
        sets: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the invariant battery.
    Check {
        /// Tuples per pointwise inequality.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        #[arg(long, hide = true)]
        mutate: Option<MutateArg>,
    },
    /// Print the standard benchmark config.
    Example,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutateArg {
    BetaSign,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Wsu { config, out } => cmd_wsu(&config, out.as_deref()),
        Command::Sweep { config, sets, out, jobs } => cmd_sweep(&config, &sets, out.as_deref(), jobs),
        Command::Check { samples, seed, mutate } => {
            cmd_check(samples, seed, mutate.map(|MutateArg::BetaSign| Mutation::BetaSignFlip))
        }
        Command::Example => {
            print!("{}", benchmark_toml());
            0
        }
    };
    ExitCode::from(code as u8)
}
