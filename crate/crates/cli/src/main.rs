//! `robmech`: validate scenarios, solve for the robustly optimal mechanism,
//! compare price and quantity regulation, and emit figure and sweep data.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "robmech",
    version,
    about = "Robust procurement mechanisms and regulation"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Cost grid size; overrides the scenario file.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Seed for the random-schedule cross-check.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Print full reports and per-point slacks.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[arg(long, global = true)]
    pub tol_constraint: Option<f64>,
    #[arg(long, global = true)]
    pub tol_objective: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every environment assumption.
    Validate { path: PathBuf },
    /// Solve for the robustly optimal quantity mechanism.
    Solve {
        path: PathBuf,
        /// Also compare against this many random short-list schedules.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Rank price-cap regulation against quantity regulation.
    Compare { path: PathBuf },
    /// Emit plot data: 1 floor mechanism, 2 robust schedule, 3 price cap.
    Figure {
        path: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        id: u8,
    },
    /// Re-solve and compare across values of one parameter.
    Sweep {
        path: PathBuf,
        /// `lowest.y.<i>`, `conjectured.x.<i>`, `cost.exponent`,
        /// `quantity_cap` or `grid_points`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, conflicts_with = "range")]
        values: Option<String>,
        /// `start:end:count`, endpoints included.
        #[arg(long)]
        range: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Validate { path } => commands::validate(path, g),
        Command::Solve { path, samples } => commands::solve(path, g, *samples),
        Command::Compare { path } => commands::compare(path, g),
        Command::Figure { path, id } => commands::figure(path, g, *id),
        Command::Sweep {
            path,
            param,
            values,
            range,
        } => commands::sweep(path, g, param, values.as_deref(), range.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code().into()
        }
    }
}
