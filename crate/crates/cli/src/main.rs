//! Command-line driver: simulate constrained flows, verify invariants, evaluate brackets.

mod bracket;
mod config;
mod error;
mod output;
mod simulate;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use env_logger::Env;

#[derive(Parser)]
#[command(name = "contact-nh", version, about = "Nonholonomic contact Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate from x0 and write trajectory.csv and manifest.json to DIR.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated start point: (q, p, z), or (q, v, z) in lagrangian mode.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite at seeded sample points and print a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the nonholonomic brackets of two observables at a point of M.
    Bracket {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, allow_hyphen_values = true)]
        g: String,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::new().filter_or("ENGINE_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, x0, out } => simulate::run(config, x0, out),
        Command::Verify { config, samples, seed, out } => verify::run(config, *samples, *seed, out.as_deref()),
        Command::Bracket { config, f, g, point } => bracket::run(config, f, g, point),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
