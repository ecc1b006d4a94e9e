//! Experiment configuration. Files are TOML; unknown keys are rejected.

use std::path::{Path, PathBuf};

use cfel_core::costmodel::SystemProfile;
use cfel_core::datagen::PartitionSpec;
use cfel_core::engine::RunConfig;
use cfel_core::topology::GraphKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub data: DataSpec,
    pub model: ModelSpec,
    /// Required for labeled data; ignored by the quadratic fleet.
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    pub topology: TopologySpec,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// One quadratic objective `½‖x − b_k‖²` per device.
    Quadratic {
        dim: usize,
        spread: f64,
        #[serde(default = "one")]
        samples_per_device: usize,
        #[serde(default)]
        sample_spread: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Gaussian class blobs.
    Classification {
        samples: usize,
        features: usize,
        classes: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    /// An MNIST-style IDX image/label pair.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        max_samples: usize,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn one() -> usize {
    1
}

fn default_test_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Quadratic,
    Logistic,
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingWeights {
    #[default]
    Metropolis,
    MaxDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Devices numbered cluster by cluster.
    #[default]
    Contiguous,
    /// Seeded balanced shuffle.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub devices: usize,
    pub servers: usize,
    pub graph: GraphKind,
    #[serde(default)]
    pub weights: MixingWeights,
    #[serde(default)]
    pub assignment: Assignment,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemPreset {
    FemnistPaper,
    CifarPaper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub preset: Option<SystemPreset>,
    #[serde(default)]
    pub custom: Option<SystemProfile>,
}

impl SystemSpec {
    pub fn profile(&self, n: usize) -> CliResult<SystemProfile> {
        match (self.preset, &self.custom) {
            (Some(SystemPreset::FemnistPaper), None) => Ok(SystemProfile::femnist_paper(n)),
            (Some(SystemPreset::CifarPaper), None) => Ok(SystemProfile::cifar_paper(n)),
            (None, Some(p)) => Ok(p.clone()),
            _ => Err(CliError::Config("[system] needs exactly one of `preset` or `custom`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Trajectory points used to estimate divergences and smoothness.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Batches drawn per device when estimating σ².
    #[serde(default = "default_sigma_trials")]
    pub sigma_trials: usize,
    /// Full-batch descent steps used to approximate `F_inf` for
    /// non-quadratic models.
    #[serde(default = "default_f_inf_steps")]
    pub f_inf_steps: usize,
}

fn default_probes() -> usize {
    cfel_core::analysis::DEFAULT_PROBES
}

fn default_sigma_trials() -> usize {
    20
}

fn default_f_inf_steps() -> usize {
    300
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            probes: default_probes(),
            sigma_trials: default_sigma_trials(),
            f_inf_steps: default_f_inf_steps(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks everything that can be checked without building data.
    pub fn validate(&self) -> CliResult<()> {
        self.run.validate()?;
        let t = &self.topology;
        if t.servers == 0 || t.devices < t.servers {
            return Err(CliError::Config(format!(
                "topology needs 1 ≤ servers ≤ devices, got servers = {}, devices = {}",
                t.servers, t.devices
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must list at least one seed".into()));
        }
        match (&self.data, &self.model) {
            (DataSpec::Quadratic { .. }, ModelSpec::Quadratic) => {}
            (DataSpec::Quadratic { .. }, _) | (_, ModelSpec::Quadratic) => {
                return Err(CliError::Config(
                    "quadratic data and the quadratic model only work together".into(),
                ))
            }
            _ => {
                if self.partition.is_none() {
                    return Err(CliError::Config("labeled data needs a [partition] section".into()));
                }
            }
        }
        if let DataSpec::Classification { test_fraction, .. } | DataSpec::Idx { test_fraction, .. } = &self.data {
            if !(0.0..1.0).contains(test_fraction) {
                return Err(CliError::Config(format!("test_fraction must lie in [0, 1), got {test_fraction}")));
            }
        }
        if let Some(s) = &self.system {
            s.profile(t.devices)?.validate()?;
        }
        if self.analysis.sigma_trials < 2 {
            return Err(CliError::Config("analysis.sigma_trials must be at least 2".into()));
        }
        Ok(())
    }
}
