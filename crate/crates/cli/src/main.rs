use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cwaft_cli::commands::{self, BootstrapArgs, CurvesArgs, FitArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "cwaft", version, about = "Mixtures of log-normal AFT models for censored competing risks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a mixture by EM and write a JSON report.
    Fit(FitArgs),
    /// Fit, then add stratified bootstrap standard errors to the report.
    Bootstrap(BootstrapArgs),
    /// Generate a synthetic data set.
    Simulate(SimulateArgs),
    /// Write model and nonparametric curves as CSV files.
    Curves(CurvesArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(a) => commands::run_fit(a),
        Command::Bootstrap(a) => commands::run_bootstrap(a),
        Command::Simulate(a) => commands::run_simulate(a),
        Command::Curves(a) => commands::run_curves(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cwaft_cli::exit_code(&e))
        }
    }
}
