use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::presets::Preset;
use crate::sweep::{cmd_sweep, SweepAxis};
use crate::{run, verify};

#[derive(Debug, Parser)]
#[command(name = "cfel", version, about = "Cooperative federated edge learning simulator")]
pub struct Cli {
    /// Worker threads for device-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment for every seed.
    Run(Source),
    /// Run one experiment per value of a sweep axis.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated axis values (defaults depend on the axis).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        /// Run sweep cells concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Check CE-FedAvg against its special cases and its matrix form.
    Verify {
        /// A mixing matrix to validate and use in the matrix-form check.
        #[arg(long)]
        mixing: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Source {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seeds (overrides the config).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

impl Source {
    pub fn resolve(&self) -> CliResult<(ExperimentConfig, PathBuf)> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(p)) => p.config()?,
            (None, None) => return Err(CliError::Config("pass --config or --preset".into())),
        };
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        cfg.validate()?;
        let out = self.out.clone().unwrap_or_else(|| cfg.output.clone());
        Ok((cfg, out))
    }
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Run(source) => {
            let (cfg, out) = source.resolve()?;
            run::cmd_run(&cfg, &out)?;
        }
        Command::Sweep {
            source,
            axis,
            values,
            parallel,
        } => {
            let (cfg, out) = source.resolve()?;
            let values = values.clone().unwrap_or_else(|| axis.default_values());
            cmd_sweep(&cfg, *axis, &values, *parallel, &out)?;
        }
        Command::Verify { mixing } => {
            verify::cmd_verify(mixing.as_deref())?;
        }
    }
    Ok(())
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let result = match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(CliError::Config(format!("cannot start {t} threads: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
