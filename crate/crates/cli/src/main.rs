//! `deepzero` — deep-zero generator experiments at the command line.
//!
//! Three subcommands map onto the library's three experiment families:
//! `generator` (time/frequency tables and envelope checks), `uniqueness`
//! (periodization, decay fits, pairing diagnostics), and `approx`
//! (best-approximation curves, contrast, annihilator probe). Outputs are
//! CSV and JSON files in the configured directory; identical configuration
//! and seed give byte-identical outputs at any thread count.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "deepzero",
    version,
    about = "Deep-zero generator experiments: tables, uniqueness diagnostics, approximation curves"
)]
struct Cli {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Lattice seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the global worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the generator and its transform; check the decay envelope.
    Generator,
    /// Periodization, perturbation decay, and pairing diagnostics.
    Uniqueness,
    /// Best-approximation curves, integer contrast, and annihilator probe.
    Approx,
}

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

fn run(cli: Cli) -> u8 {
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("could not size the worker pool: {e}");
            return 2;
        }
    }
    let mut config = match config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(message) => {
            eprintln!("{message}");
            return 2;
        }
    };
    if let Some(seed) = cli.seed {
        config.lattice.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    let outcome = match cli.command {
        Command::Generator => commands::generator(&config),
        Command::Uniqueness => commands::uniqueness(&config),
        Command::Approx => commands::approx(&config),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("{failure}");
            commands::exit_code(&failure)
        }
    }
}
