//! `anholonomy`: sweeps, adiabatic cycles and structure analysis of rank-1
//! kicked Floquet families from presets or scenario files.

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{Scenario, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CERTIFICATION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] floquet_anholonomy::Error),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn from_config(e: floquet_anholonomy::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Certification(_) => EXIT_CERTIFICATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "anholonomy", version, about = "Quasienergy anholonomy experiments for rank-1 kicked maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track quasienergies over a parameter period and certify the holonomy.
    Sweep(RunArgs),
    /// Ramp the kick strength slowly and follow the state through the levels.
    Adiabatic(RunArgs),
    /// Degeneracy, cyclicity and Hilbert-space reduction reports.
    Analyze(RunArgs),
    /// Print the available presets.
    ListPresets,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, conflicts_with = "random")]
    pub preset: Option<String>,
    /// Scenario file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random cyclic scenario of dimension N.
    #[arg(long, value_name = "N")]
    pub random: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid steps per parameter period.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Adiabatic steps per cycle; a comma list adds a convergence table.
    #[arg(long = "M", value_delimiter = ',', value_name = "M")]
    pub m: Option<Vec<usize>>,
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Initial level for adiabatic runs.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long, env = "ANHOLONOMY_OUT")]
    pub out: Option<PathBuf>,
    /// Report the certificate without failing on it.
    #[arg(long)]
    pub no_certify: bool,
}

impl RunArgs {
    /// File keys overridden by flags.
    pub fn merged_config(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(p) = &self.preset {
            cfg.preset = Some(p.clone());
        }
        if let Some(n) = self.random {
            cfg.preset = Some("random-cyclic".into());
            cfg.dimension = Some(n);
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.steps.is_some() {
            cfg.steps = self.steps;
        }
        if self.m.is_some() {
            cfg.adiabatic_steps = self.m.clone();
        }
        if self.cycles.is_some() {
            cfg.cycles = self.cycles;
        }
        if self.level.is_some() {
            cfg.initial_level = self.level;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if cfg.preset.is_none() && self.config.is_none() {
            return Err(CliError::Config("one of --preset, --random, --config is required".into()));
        }
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<(Scenario, PathBuf), CliError> {
        let cfg = self.merged_config()?;
        let fallback = self
            .config
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
        Ok((Scenario::resolve(&cfg, &fallback)?, out))
    }
}

/// Runs a parsed command, writing progress to `stdout` and diagnostics to
/// `stderr`; returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Sweep(args) => commands::sweep(args, stdout, stderr),
        Command::Adiabatic(args) => commands::adiabatic(args, stdout, stderr),
        Command::Analyze(args) => commands::analyze(args, stdout, stderr),
        Command::ListPresets => commands::list_presets(stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
