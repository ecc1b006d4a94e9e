use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, DeviceDataset};
use crate::error::{Error, Result};
use crate::numerics::ParamVec;
use crate::rng::{self, Domain};

/// Per-device quadratic objectives `F_k(x) = ½‖x − b_k‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFleet {
    pub targets: Vec<ParamVec>,
    /// Minimizer of the global objective: the mean of the targets.
    pub minimizer: ParamVec,
}

/// Targets `b_k = spread · N(0, I_d)`, drawn deterministically from `seed`.
pub fn make_quadratic_fleet(n: usize, d: usize, spread: f64, seed: u64) -> Result<QuadraticFleet> {
    if n == 0 || d == 0 {
        return Err(Error::config("quadratic fleet needs n ≥ 1 and d ≥ 1"));
    }
    let targets: Vec<ParamVec> = (0..n)
        .map(|k| {
            let mut r = rng::stream(seed, Domain::Data, k as u64, 0);
            ParamVec::from_vec(
                (0..d)
                    .map(|_| spread * r.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
        })
        .collect();
    QuadraticFleet::from_targets(targets)
}

impl QuadraticFleet {
    pub fn from_targets(targets: Vec<ParamVec>) -> Result<Self> {
        let minimizer =
            ParamVec::mean(&targets).ok_or_else(|| Error::config("empty quadratic fleet"))?;
        if targets.iter().any(|t| t.dim() != minimizer.dim()) {
            return Err(Error::config("quadratic targets differ in dimension"));
        }
        Ok(QuadraticFleet { targets, minimizer })
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn dim(&self) -> usize {
        self.minimizer.dim()
    }

    /// Per-device sample sets whose mean is exactly `b_k`. With
    /// `samples_per_device == 1` each device holds its target alone; otherwise
    /// zero-mean offsets of scale `sample_spread` are added.
    pub fn device_datasets(
        &self,
        samples_per_device: usize,
        sample_spread: f64,
        seed: u64,
    ) -> Result<Vec<DeviceDataset>> {
        if samples_per_device == 0 {
            return Err(Error::config("samples_per_device must be positive"));
        }
        let d = self.dim();
        self.targets
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let mut r = rng::stream(seed, Domain::Data, k as u64, 1);
                let mut offsets: Vec<f64> = (0..samples_per_device * d)
                    .map(|_| {
                        if samples_per_device == 1 {
                            0.0
                        } else {
                            sample_spread * r.sample::<f64, _>(StandardNormal)
                        }
                    })
                    .collect();
                for j in 0..d {
                    let mean = (0..samples_per_device).map(|s| offsets[s * d + j]).sum::<f64>()
                        / samples_per_device as f64;
                    for s in 0..samples_per_device {
                        offsets[s * d + j] -= mean;
                    }
                }
                let feats: Vec<f64> = (0..samples_per_device)
                    .flat_map(|s| (0..d).map(move |j| (s, j)))
                    .map(|(s, j)| b[j] + offsets[s * d + j])
                    .collect();
                Ok(DeviceDataset::new(
                    k,
                    Dataset::new(feats, d, vec![0; samples_per_device], 1)?,
                ))
            })
            .collect()
    }
}

/// Gaussian class blobs: class means are `separation · N(0, I)`, samples add
/// unit Gaussian noise. Labels cycle `0, 1, …, classes−1` so class counts differ
/// by at most one.
pub fn make_classification(
    samples: usize,
    features: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if samples == 0 || features == 0 || classes < 2 {
        return Err(Error::config(
            "classification data needs samples ≥ 1, features ≥ 1 and classes ≥ 2",
        ));
    }
    let mut r = rng::stream(seed, Domain::Data, u64::MAX, 0);
    let means: Vec<f64> = (0..classes * features)
        .map(|_| separation * r.sample::<f64, _>(StandardNormal))
        .collect();
    let mut feats = Vec::with_capacity(samples * features);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % classes;
        labels.push(c);
        for j in 0..features {
            feats.push(means[c * features + j] + r.sample::<f64, _>(StandardNormal));
        }
    }
    Dataset::new(feats, features, labels, classes)
}
