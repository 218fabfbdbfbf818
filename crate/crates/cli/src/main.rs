//! `etdist`: distances between measures and metric measure spaces.
//!
//! Results go to stdout as JSON, logs and errors to stderr. Exit codes:
//! 0 success, 1 invalid input, 2 solver failure, 3 failed checks.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etdist_core::Preset;

mod commands;
mod error;
mod json;
mod record;
mod space_file;

use commands::Settings;
use error::CliError;
use record::Mode;

#[derive(Parser, Debug)]
#[command(name = "etdist", version, about = "Entropy-Transport distances between measures and metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distance between two space files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        target: Target,
        /// Re-evaluate the objective from the emitted record.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Pairwise distances between all `*.json` space files of a directory.
    Gram {
        dir: PathBuf,
        #[command(flatten)]
        target: Target,
        /// Write the list of failed pairs here (default: stderr).
        #[arg(long, value_name = "PATH")]
        errors: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Property batteries: axioms, bounds, limits, conic, oracle, all, or a battery id.
    Check {
        suite: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args, Debug)]
struct Target {
    /// hk, ghk, qpl:p, lpl:p, pl:p, bl, wp:p or custom:a=..,f=..,l=..
    #[arg(long, default_value = "hk", value_parser = parse_preset)]
    preset: Preset,
    #[arg(long, value_enum, default_value_t = Mode::Sturm)]
    mode: Mode,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Relative tolerance of the inner and outer solvers.
    #[arg(long)]
    tol: Option<f64>,
    /// Random restarts of the alternating minimization.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Comma-separated decreasing epsilons for the scaling iterations.
    #[arg(long, value_delimiter = ',')]
    epsilon_schedule: Option<Vec<f64>>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid step of the brute-force oracle.
    #[arg(long)]
    oracle_step: Option<f64>,
}

impl From<SolverArgs> for Settings {
    fn from(a: SolverArgs) -> Self {
        Settings {
            tol: a.tol,
            seeds: a.seeds,
            max_iter: a.max_iter,
            epsilon_schedule: a.epsilon_schedule,
            jobs: a.jobs,
            seed: a.seed,
            oracle_step: a.oracle_step,
        }
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::parse(s).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dist { a, b, target, verify, solver } => {
            let s: Settings = solver.into();
            s.validate()?;
            println!("{}", commands::dist(&a, &b, target.preset, target.mode, verify, &s)?);
        }
        Command::Gram { dir, target, errors, solver } => {
            let s: Settings = solver.into();
            s.validate()?;
            let (matrix, failed) = commands::gram(&dir, target.preset, target.mode, &s)?;
            println!("{}", json::to_string(&matrix));
            let list = json::to_string(&failed);
            match errors {
                Some(path) => std::fs::write(&path, list + "\n")
                    .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?,
                None if !failed.is_empty() => eprintln!("{list}"),
                None => {}
            }
            if !failed.is_empty() {
                return Err(CliError::Solver(format!("{} of the pairs failed", failed.len())));
            }
        }
        Command::Check { suite, solver } => {
            let s: Settings = solver.into();
            s.validate()?;
            let report = commands::check(&suite, &s)?;
            println!("{}", json::to_string(&report));
            if !report.passed {
                let failed: Vec<u32> = report.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
                return Err(CliError::Check(format!("failing checks {failed:?}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e}");
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            ExitCode::from(e.code())
        }
    }
}
