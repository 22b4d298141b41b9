use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use deadbeat::cli::{cmd_check, cmd_observe, cmd_simulate, cmd_sweep, load_config, Overrides};

/// Dead-beat state reconstruction for systems linear in the unmeasured state.
#[derive(Debug, Parser)]
#[command(name = "deadbeat", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Directory for output files (overrides `[output] dir`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    /// Seed for random measurement noise (overrides `[noise] seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing but errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the plant and write its trajectory.
    Simulate { config: PathBuf },
    /// Run the observer next to the plant and write both trajectories.
    Observe { config: PathBuf },
    /// Report whether the first window distinguishes initial states.
    Check { config: PathBuf },
    /// Run the configured noise-robustness sweep.
    Sweep { config: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        output: args.output,
        plot: args.plot,
        seed: args.seed,
    };
    let (path, command): (_, fn(&_) -> _) = match &args.command {
        Command::Simulate { config } => (config, cmd_simulate),
        Command::Observe { config } => (config, cmd_observe),
        Command::Check { config } => (config, cmd_check),
        Command::Sweep { config } => (config, cmd_sweep),
    };
    match load_config(path, &overrides).and_then(|cfg| command(&cfg)) {
        Ok(outcome) => {
            if !args.quiet {
                for line in &outcome.summary {
                    println!("{line}");
                }
                for file in &outcome.files {
                    println!("wrote {}", file.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
