use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::check_hyper;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Intra-cluster averaging every τ steps, gossip across servers every qτ.
    CeFedavg,
    /// One cloud average of all devices every qτ steps.
    Fedavg,
    /// q − 1 edge averages, then one cloud average of all devices.
    HierFavg,
    /// Edge averages only; clusters never exchange models.
    LocalEdge,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CeFedavg => "ce_fedavg",
            Algorithm::Fedavg => "fedavg",
            Algorithm::HierFavg => "hier_favg",
            Algorithm::LocalEdge => "local_edge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Devices weighted by their local sample counts.
    SampleSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauUnit {
    /// τ mini-batch steps, each batch drawn with replacement.
    #[default]
    Iterations,
    /// τ shuffled sweeps over the device's data.
    Epochs,
}

fn default_pi() -> usize {
    crate::topology::DEFAULT_GOSSIP_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Local steps (or epochs) between intra-cluster averages.
    pub tau: usize,
    /// Edge rounds per global round.
    pub q: usize,
    /// Gossip steps per inter-cluster aggregation.
    #[serde(default = "default_pi")]
    pub pi: usize,
    pub lr: f64,
    /// Global rounds.
    pub rounds: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub tau_unit: TauUnit,
    /// Variance of isotropic Gaussian noise added to every stochastic
    /// gradient (`E‖ξ‖² = noise_sigma_sq`). Zero disables it.
    #[serde(default)]
    pub noise_sigma_sq: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, tau: usize, q: usize, pi: usize, lr: f64, rounds: usize) -> Self {
        RunConfig {
            algorithm,
            tau,
            q,
            pi,
            lr,
            rounds,
            batch_size: 1,
            momentum: 0.0,
            weighting: Weighting::Uniform,
            tau_unit: TauUnit::Iterations,
            noise_sigma_sq: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("q", self.q), ("pi", self.pi), ("rounds", self.rounds), ("batch_size", self.batch_size)] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        check_hyper(self.lr, self.momentum)?;
        if !(self.noise_sigma_sq >= 0.0 && self.noise_sigma_sq.is_finite()) {
            return Err(Error::config("noise_sigma_sq must be a finite non-negative number"));
        }
        Ok(())
    }

    /// Local iterations per global round, `qτ`.
    pub fn period(&self) -> usize {
        self.q * self.tau
    }

    /// Total local iterations `T = pqτ`.
    pub fn total_iterations(&self) -> usize {
        self.rounds * self.period()
    }
}
