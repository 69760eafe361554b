//! `uavaccel` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
//! violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use uavaccel::app::{AppError, RunConfig};

use commands::Command;

#[derive(Parser, Debug)]
#[command(name = "uavaccel", version, about = "Multi-precision 1D-CNN accelerator emulator for acoustic UAV detection")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value file supplying defaults for flags not given.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

pub enum Failure {
    Usage { msg: String, sub: &'static str },
    Data(String),
    Invariant(String),
}

impl Failure {
    pub fn usage(sub: &'static str, msg: impl Into<String>) -> Self {
        Self::Usage { msg: msg.into(), sub }
    }
}

/// Data error, or invariant violation when the library says so.
pub fn fail(e: impl Into<AppError>) -> Failure {
    let e = e.into();
    if e.is_invariant_violation() {
        Failure::Invariant(e.to_string())
    } else {
        Failure::Data(e.to_string())
    }
}

/// Settings shared by all subcommands after merging the config file.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

fn synopsis(sub: &str) -> String {
    let mut cmd = Cli::command();
    match cmd.find_subcommand_mut(sub) {
        Some(s) => s.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            AppError::Io(io) => Failure::Data(format!("{}: {io}", p.display())),
            e => Failure::Usage { msg: format!("{}: {e}", p.display()), sub: "" },
        })?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out: cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        cfg,
    };
    commands::dispatch(cli.command, &ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage { msg, sub })) => {
            eprintln!("error: {msg}\n\n{}", synopsis(sub));
            ExitCode::from(1)
        }
        Ok(Err(Failure::Data(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Invariant(msg))) => {
            eprintln!("internal invariant violated: {msg}");
            ExitCode::from(3)
        }
        Err(_) => {
            eprintln!("internal invariant violated: unexpected panic");
            ExitCode::from(3)
        }
    }
}
