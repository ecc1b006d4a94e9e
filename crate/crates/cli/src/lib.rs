//! Configuration, orchestration and reporting for the `cfel` command.

pub mod cli;
pub mod config;
pub mod error;
pub mod presets;
pub mod run;
pub mod setup;
pub mod sweep;
pub mod verify;

pub use cli::{execute, Cli};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
