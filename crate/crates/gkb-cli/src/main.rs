mod args;
mod commands;
mod report;

use clap::Parser;

use args::{Cli, Command};

/// Exit codes: 0 converged / table written, 1 runtime error, 2 usage error
/// (from clap), 3 solver finished without converging.
fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => commands::cmd_run(a),
        Command::ConvergenceStudy(a) => commands::cmd_convergence_study(a),
        Command::NuSweep(a) => commands::cmd_nu_sweep(a),
        Command::ScalingSweep(a) => commands::cmd_scaling_sweep(a),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
