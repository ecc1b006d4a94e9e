use clap::ValueEnum;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    FemnistPaper,
    CifarPaper,
    DeskQuadratic,
    DeskLogistic,
}

impl Preset {
    pub fn toml(self) -> &'static str {
        match self {
            Preset::FemnistPaper => include_str!("../presets/femnist-paper.toml"),
            Preset::CifarPaper => include_str!("../presets/cifar-paper.toml"),
            Preset::DeskQuadratic => include_str!("../presets/desk-quadratic.toml"),
            Preset::DeskLogistic => include_str!("../presets/desk-logistic.toml"),
        }
    }

    pub fn config(self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_toml(self.toml())
    }
}
