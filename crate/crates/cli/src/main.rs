mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use leafdbar::error::Error;

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Lemmas,
    Partition,
    Group,
    Solve,
    Sweep,
    Constants,
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "leafdbar", version, about = "Weighted minimal dbar solves on suspension laminations")]
struct Cli {
    command: Command,
    /// TOML configuration; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of every sampled computation.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; affects speed only.
    #[arg(long)]
    threads: Option<usize>,
}

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_CHECK: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_VALIDATION,
        Error::Check(_) => EXIT_CHECK,
        Error::Domain(_) | Error::OutsideDisk { .. } => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = RunConfig::load(cli.config.as_deref()).and_then(|mut cfg| {
        if let Some(s) = cli.seed {
            cfg.problem.seed = s;
        }
        cfg.validate()?;
        commands::run(cli.command, &cfg, &cli.out)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
