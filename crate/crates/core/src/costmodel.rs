//! Wall-clock estimate of a training run: local computation plus uplink and
//! backhaul transfer time. Model download and server-side aggregation are
//! treated as free.

use serde::{Deserialize, Serialize};

use crate::engine::Algorithm;
use crate::error::{Error, Result};

/// Bits per parameter on the wire.
pub const BITS_PER_PARAM: f64 = 32.0;
const MBPS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemProfile {
    /// FLOPs of one local SGD iteration (per-sample cost × batch size).
    pub flops_per_iteration: f64,
    /// Processing rate of each device, FLOP/s.
    pub device_flops: Vec<f64>,
    /// Model size in bits.
    pub model_bits: f64,
    /// Device → edge uplink, bit/s.
    pub b_d2e: f64,
    /// Edge ↔ edge backhaul link, bit/s.
    pub b_e2e: f64,
    /// Device → cloud uplink, bit/s. Each device has its own link.
    pub b_d2c: f64,
}

impl SystemProfile {
    /// CNN on FEMNIST: 13.30 MFLOPs per sample at batch 50, 691.2 GFLOPS
    /// devices, 893,342 parameters; 10 / 50 / 1 Mbps links.
    pub fn femnist_paper(n: usize) -> Self {
        SystemProfile {
            flops_per_iteration: 13.30e6 * 50.0,
            device_flops: vec![691.2e9; n],
            model_bits: 893_342.0 * BITS_PER_PARAM,
            b_d2e: 10.0 * MBPS,
            b_e2e: 50.0 * MBPS,
            b_d2c: 1.0 * MBPS,
        }
    }

    /// VGG-11 on CIFAR-10: 920.67 MFLOPs per sample at batch 50, 9,750,922
    /// parameters; same devices and links as the FEMNIST profile.
    pub fn cifar_paper(n: usize) -> Self {
        SystemProfile {
            flops_per_iteration: 920.67e6 * 50.0,
            model_bits: 9_750_922.0 * BITS_PER_PARAM,
            ..Self::femnist_paper(n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("flops_per_iteration", self.flops_per_iteration),
            ("model_bits", self.model_bits),
            ("b_d2e", self.b_d2e),
            ("b_e2e", self.b_e2e),
            ("b_d2c", self.b_d2c),
        ];
        for (name, v) in scalars {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.device_flops.is_empty() {
            return Err(Error::domain("profile lists no devices"));
        }
        if let Some(v) = self.device_flops.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("device rate must be positive, got {v}")));
        }
        Ok(())
    }

    /// `max_k steps_k · C / c_k`.
    pub fn compute_time(&self, steps_per_device: &[usize]) -> f64 {
        self.device_flops
            .iter()
            .zip(steps_per_device)
            .map(|(c, &s)| s as f64 * self.flops_per_iteration / c)
            .fold(0.0, f64::max)
    }
}

/// Communication seconds of one global round for each algorithm.
fn comm_time(algorithm: Algorithm, p: &SystemProfile, q: usize, pi: usize) -> f64 {
    let w = p.model_bits;
    match algorithm {
        Algorithm::CeFedavg => q as f64 * w / p.b_d2e + pi as f64 * w / p.b_e2e,
        Algorithm::Fedavg => w / p.b_d2c,
        Algorithm::HierFavg => (q - 1) as f64 * w / p.b_d2e + w / p.b_d2c,
        Algorithm::LocalEdge => q as f64 * w / p.b_d2e,
    }
}

/// Seconds per global round when every device runs `qτ` iterations.
pub fn round_time(algorithm: Algorithm, profile: &SystemProfile, tau: usize, q: usize, pi: usize) -> Result<f64> {
    profile.validate()?;
    if q == 0 || tau == 0 {
        return Err(Error::domain("tau and q must be at least 1"));
    }
    let steps = vec![q * tau; profile.device_flops.len()];
    Ok(profile.compute_time(&steps) + comm_time(algorithm, profile, q, pi))
}

/// Seconds per global round with per-device iteration counts (used when τ
/// counts epochs and devices hold different amounts of data).
pub fn round_time_with_steps(
    algorithm: Algorithm,
    profile: &SystemProfile,
    steps_per_device: &[usize],
    q: usize,
    pi: usize,
) -> Result<f64> {
    profile.validate()?;
    if q == 0 {
        return Err(Error::domain("q must be at least 1"));
    }
    if steps_per_device.len() != profile.device_flops.len() {
        return Err(Error::domain(format!(
            "{} step counts for {} devices",
            steps_per_device.len(),
            profile.device_flops.len()
        )));
    }
    Ok(profile.compute_time(steps_per_device) + comm_time(algorithm, profile, q, pi))
}

pub fn total_time(round_time: f64, rounds: usize) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::domain("need at least one global round"));
    }
    Ok(rounds as f64 * round_time)
}
