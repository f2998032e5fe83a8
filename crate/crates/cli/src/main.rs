//! Scenario runner for the driven Bose-Hubbard entanglement experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] latticesim::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Library(latticesim::Error::InvalidInput(_)) => 2,
            CliError::Library(latticesim::Error::NonConvergence { .. }) => 3,
            CliError::Library(latticesim::Error::Capacity { .. }) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "latticesim", version, about)]
struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set system.cases=[[4,4]]`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (overrides output.directory).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Print the default scenario and exit.
    #[arg(long)]
    emit_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground-state entropy and postselection probability over U/J.
    GroundScan,
    /// Thermal-state negativity and postselection probability over U/J and T.
    ThermalScan,
    /// Entropy and postselection probability along the drive schedule.
    Drive,
    /// Fidelity against a perturbed parameter, with its FWHM.
    FidelityScan,
    /// Negativity of the Gaussian timing ensemble over tau.
    MixedNegativity,
    /// Print the default scenario.
    EmitDefaultConfig,
}

fn thread_count(cfg: &ExperimentConfig) -> Result<Option<usize>, CliError> {
    match std::env::var("LATTICESIM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("LATTICESIM_THREADS = `{v}` is not a positive integer"))),
        },
        Err(_) => Ok(cfg.numerics.threads),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let command = match (cli.command, cli.emit_default_config) {
        (_, true) | (Some(Command::EmitDefaultConfig), _) => {
            print!("{}", ExperimentConfig::default().to_toml());
            return Ok(());
        }
        (Some(c), false) => c,
        (None, false) => return Err(CliError::Config("no command given (try --help)".into())),
    };
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = cli.out {
        cfg.output.directory = dir;
    }
    if let Some(n) = thread_count(&cfg)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match command {
        Command::GroundScan => commands::ground_scan(&cfg),
        Command::ThermalScan => commands::thermal_scan(&cfg),
        Command::Drive => commands::drive(&cfg),
        Command::FidelityScan => commands::fidelity(&cfg),
        Command::MixedNegativity => commands::mixed_negativity(&cfg),
        Command::EmitDefaultConfig => unreachable!(),
    }
    .map(|_| ())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
