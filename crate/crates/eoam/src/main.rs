use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eoam::commands::{cmd_precompute, cmd_run, cmd_sweep, cmd_validate};
use eoam::exit;

/// Emergency obstacle avoidance: offline tables and closed-loop scenarios.
#[derive(Debug, Parser)]
#[command(name = "eoam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the maneuver grid and write lookup tables and phase diagrams.
    Precompute {
        #[arg(long)]
        vehicle: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
    /// Simulate one scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV per plot channel group.
        #[arg(long)]
        dump_plots: bool,
    },
    /// Simulate every cell of a scenario matrix.
    Sweep {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
    /// Check persisted tables against the model invariants.
    Validate {
        #[arg(long)]
        tables: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match &cli.command {
        Command::Precompute {
            vehicle,
            grid,
            out,
            parallel,
        } => cmd_precompute(vehicle, grid, out, *parallel),
        Command::Run {
            scenario,
            tables,
            out,
            dump_plots,
        } => cmd_run(scenario, tables, out, *dump_plots),
        Command::Sweep {
            matrix,
            tables,
            out,
            parallel,
        } => cmd_sweep(matrix, tables, out, *parallel),
        Command::Validate { tables } => cmd_validate(tables),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
