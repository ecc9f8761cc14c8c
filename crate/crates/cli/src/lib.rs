//! Batch front-end for `gauss-schrodinger` experiments.
//!
//! One configuration file describes one experiment; a run writes its data
//! files and a `manifest.json` into one output directory.
//!
//! Exit status: 0 on success, 1 on I/O errors, 2 on configuration errors,
//! 3 on solver failures (including any failed ensemble sample), 4 when a hard
//! validation fails (bracketing, Wegner margin beyond 3σ, density bound,
//! asymptotic tolerance, or a requested IPR ratio).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::{parse_config, ConfigErrors, ExperimentConfig, ExperimentKind, OutputFormat};
pub use run::{run, RunOptions, RunOutcome};

/// Environment variable giving the default worker count.
pub const WORKERS_ENV: &str = "GSCH_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Io(String),
    Config(Vec<String>),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(m) => write!(f, "I/O error: {m}"),
            Self::Config(errs) => {
                write!(f, "configuration error")?;
                for e in errs {
                    write!(f, "\n  - {e}")?;
                }
                Ok(())
            }
            Self::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<ConfigErrors> for CliError {
    fn from(e: ConfigErrors) -> Self {
        Self::Config(e.0)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "gschro", version, about = "Gaussian random Schrödinger operator experiments")]
struct Args {
    /// Experiment configuration (sectioned TOML or JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides output.directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: ensemble.workers, then $GSCH_WORKERS, then all cores).
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Master seed (overrides ensemble.master_seed).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    print_config: bool,
}

/// Parse arguments, run, report, and return the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return 2;
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", CliError::from(e));
            return 2;
        }
    };
    let opts = RunOptions {
        out: args.out,
        workers: args.workers.map(|w| w as usize),
        seed: args.seed,
        format: args.format.map(|f| match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Both => OutputFormat::Both,
        }),
        env_workers: std::env::var(WORKERS_ENV).ok(),
    };
    if args.print_config {
        opts.apply(&mut config);
        print!("{}", config.to_toml());
        return 0;
    }
    match run(config, &opts) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.validation_failures {
                eprintln!("validation failure: {f}");
            }
            if outcome.failed_samples > 0 {
                eprintln!("{} sample(s) failed", outcome.failed_samples);
            }
            println!("wrote {} file(s) to {}", outcome.files.len(), outcome.directory.display());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
