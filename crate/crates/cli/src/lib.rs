//! Command-line driver: config loading, the seven subcommands and their result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Command, Outcome};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use output::MANIFEST_NAME as MANIFEST;
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "qmpe-lab", version, about = "Relaxation and thermometry experiments on a star-coupled probe")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// JSON config; built-in defaults when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Liouvillian spectrum, checked against the closed form when detunings vanish.
    Spectrum(Common),
    /// One trajectory towards the Gibbs state.
    Evolve(Common),
    /// Ground-state optimality of the local temperature signal.
    Optimal(Common),
    /// Ground trajectory against mixed references, with the slow-tail bound.
    Mpemba(Common),
    /// Exceedance frequency over Haar-random references.
    Montecarlo(Common),
    /// Randomized trace-norm inequality checks.
    Lemmas(Common),
    /// Data and gnuplot script for both panels of the relaxation/thermometry figure.
    Figure3(Common),
}

impl Sub {
    fn split(&self) -> (Command, &Common) {
        match self {
            Sub::Spectrum(c) => (Command::Spectrum, c),
            Sub::Evolve(c) => (Command::Evolve, c),
            Sub::Optimal(c) => (Command::Optimal, c),
            Sub::Mpemba(c) => (Command::Mpemba, c),
            Sub::Montecarlo(c) => (Command::Montecarlo, c),
            Sub::Lemmas(c) => (Command::Lemmas, c),
            Sub::Figure3(c) => (Command::Figure3, c),
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_json(r#"{"schema_version": 1}"#)?,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.parallel_width = Some(t);
    }
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command into `cfg.output_dir` (default `out`), manifest last.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let started = chrono::Utc::now();
    let root = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel_width())
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| commands::dispatch(cmd, cfg, &mut out))?;
    out.write_manifest(cmd.as_str(), cfg, started)?;
    Ok(outcome)
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (cmd, common) = cli.command.split();
    let result = resolve_config(common).and_then(|cfg| run_command(cmd, &cfg));
    match result {
        Ok(o) => {
            println!("{}", o.summary);
            match o.failure {
                None => 0,
                Some(msg) => {
                    let e = commands::check_failure(cmd, msg);
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
