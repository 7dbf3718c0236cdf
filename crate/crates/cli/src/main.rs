//! `mhng`: dataset generation, simulation, the live session server, analysis
//! and log replay.

mod analyze;
mod gen_data;
mod replay;
mod serve;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mhng",
    version,
    about = "Metropolis-Hastings naming game laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a stimulus dataset: manifest plus one PNG per stimulus.
    GenData(gen_data::Args),
    /// Simulate agent pairs and write an engine event log.
    Simulate(simulate::Args),
    /// Run the two-participant session server.
    Serve(serve::Args),
    /// Run the hypothesis tests over one or more event logs.
    Analyze(analyze::Args),
    /// Replay an event log and report the reconstructed session.
    Replay(replay::Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => gen_data::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Serve(args) => serve::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Replay(args) => replay::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
