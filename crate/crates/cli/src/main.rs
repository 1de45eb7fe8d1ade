//! `cgdare`: solve and analyze constrained generalized discrete Riccati
//! equations from JSON problem files.
//!
//! Exit codes: 0 success, 1 parse or validation failure, 2 the iteration
//! diverged, 3 the iteration limit was reached, 4 a library routine rejected
//! the request.

mod commands;
mod poles;
mod problem;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Flags, Outcome};
use crate::problem::{FieldError, ProblemFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Syntax(String),
    #[error("{0}")]
    Field(FieldError),
    #[error("{0}")]
    Invalid(cgdare::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Module(cgdare::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Module(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cgdare",
    version,
    about = "Constrained generalized discrete algebraic Riccati equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal positive semidefinite solution with its subspaces and fixed spectrum
    Solve(CommonArgs),
    /// Classify every matrix in `X_candidates`
    Verify(CommonArgs),
    /// All symmetric solutions of X = AᵀXA + Q
    Stein(CommonArgs),
    /// Normal rank of the Popov function and spectral-factor identities
    Spectral(CommonArgs),
    /// Place the poles on R₀ without changing the optimal cost
    Stabilize(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Problem file (JSON)
    problem: PathBuf,

    /// Sets rank_rel, conv_rel and psd_clip at once
    #[arg(long)]
    tol: Option<f64>,

    #[arg(long = "max-iter")]
    max_iter: Option<usize>,

    /// Sample points for the normal rank of the Popov function
    #[arg(long, default_value_t = 16)]
    samples: usize,

    /// Requested poles on R₀, e.g. `0,0.5+0.1i,0.5-0.1i`; all zero when omitted
    #[arg(long, allow_hyphen_values = true)]
    poles: Option<String>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn flags(&self) -> Flags {
        Flags {
            tol: self.tol,
            max_iter: self.max_iter,
            samples: self.samples,
            poles: self.poles.clone(),
            seed: self.seed,
        }
    }
}

fn write_report(outcome: &Outcome, out: Option<&Path>) -> Result<(), CliError> {
    let text = outcome.report.to_json();
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(name: &str, args: &CommonArgs) -> Result<u8, CliError> {
    let problem = ProblemFile::read(&args.problem)?;
    let flags = args.flags();
    let outcome = match name {
        "solve" => commands::solve(&problem, &flags),
        "verify" => commands::verify(&problem, &flags),
        "stein" => commands::stein(&problem, &flags),
        "spectral" => commands::spectral(&problem, &flags),
        _ => commands::stabilize(&problem, &flags),
    }?;
    write_report(&outcome, args.out.as_deref())?;
    for line in &outcome.summary {
        eprintln!("cgdare {name}: {line}");
    }
    Ok(outcome.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Verify(a) => ("verify", a),
        Command::Stein(a) => ("stein", a),
        Command::Spectral(a) => ("spectral", a),
        Command::Stabilize(a) => ("stabilize", a),
    };
    match run(name, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}: {e}", args.problem.display());
            ExitCode::from(e.exit_code())
        }
    }
}
