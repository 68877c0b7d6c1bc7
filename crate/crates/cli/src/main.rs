//! Command-line entry point.
//!
//! `hplap --config run.cfg [--out DIR] [--seed N] [--quiet]` loads a
//! plain-text run configuration, dispatches to the selected pipeline,
//! and exits by the contract: 0 on success, 1 for usage and
//! configuration errors, 2 for violated run-time invariants, 3 for
//! non-convergence.

mod config;
mod expr;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Finite element driver for anisotropic p-Laplace problems: convex
/// Dirichlet solves, first eigenpairs, singular-load truncation runs,
/// and two-solution continuation, all configured by a plain-text file.
#[derive(Debug, Parser)]
#[command(name = "hplap", version)]
struct Args {
    /// Run configuration file ([section] headers, key = value lines,
    /// '#' comments).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the [output] directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the [solver] seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Suppress the per-phase summary lines on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!(
                "error: cannot read configuration file {}: {e}",
                args.config.display()
            );
            return ExitCode::from(1);
        }
    };
    let mut cfg = match config::parse_config(&text, &args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = args.out {
        cfg.out_dir = dir;
    }
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }

    match run::run(&cfg, args.quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
