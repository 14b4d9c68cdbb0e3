//! `kdvist`: reflection tables, KdV solutions, invariant certificates and
//! cross-validation runs from a TOML configuration.

mod commands;
mod config;
mod output;

use clap::Parser;
use config::{Command, Format, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] kdvist_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kdvist", version, about = "KdV solutions from Hankel-operator determinants")]
struct Cli {
    /// Defaults to `command` in the configuration file.
    #[arg(value_enum)]
    command: Option<Command>,
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all available cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (default: configuration, then standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if cli.out.is_some() {
        cfg.output.path = cli.out;
    }
    let command = match (cli.command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "command `{a:?}` conflicts with `command = {b:?}` in the configuration"
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::Config("no command given on the command line or in the configuration".into())),
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("`--workers` must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let profile = cfg.profile.build().map_err(|e| CliError::Config(e.to_string()))?;

    let outcome = match command {
        Command::Reflection => commands::reflection(&cfg, &profile)?,
        Command::Solve => commands::solve(&cfg, &profile)?,
        Command::Certify => commands::certify(&cfg, &profile)?,
        Command::Validate => commands::validate(&cfg, &profile)?,
    };

    let text = outcome.table.render(cfg.output.format);
    match &cfg.output.path {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    if let (Some(p), Some(plot)) = (&cfg.output.gnuplot, &outcome.gnuplot) {
        write_file(p, plot)?;
    }
    if let (Some(p), Some(dump)) = (&cfg.output.table, &outcome.table_dump) {
        write_file(p, dump)?;
    }
    match outcome.failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdvist: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
