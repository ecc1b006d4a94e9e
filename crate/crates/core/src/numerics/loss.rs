use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamVec;
use crate::datagen::{Dataset, DeviceDataset};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Per-sample losses with hand-written gradients. All objectives are the mean
/// of the per-sample loss over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossModel {
    /// `½ Σ_j a_j (x_j − z_j)²` where the sample row `z` is a target point.
    Quadratic { curvature: Vec<f64> },
    /// Multinomial logistic regression. Parameters are the `classes × features`
    /// weight matrix (row-major) followed by `classes` biases.
    Logistic { features: usize, classes: usize },
    /// One tanh hidden layer and a softmax output. Layout: `W1 (hidden ×
    /// features)`, `b1`, `W2 (classes × hidden)`, `b2`.
    Mlp {
        features: usize,
        hidden: usize,
        classes: usize,
    },
}

/// A stochastic gradient together with the batch that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub gradient: ParamVec,
    pub batch_ids: Vec<usize>,
    pub device_id: usize,
}

impl LossModel {
    pub fn quadratic(dim: usize) -> Self {
        LossModel::Quadratic {
            curvature: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossModel::Quadratic { curvature } => curvature.len(),
            LossModel::Logistic { features, classes } => classes * (features + 1),
            LossModel::Mlp {
                features,
                hidden,
                classes,
            } => hidden * (features + 1) + classes * (hidden + 1),
        }
    }

    /// Width of a data row this model consumes.
    pub fn input_dim(&self) -> usize {
        match self {
            LossModel::Quadratic { curvature } => curvature.len(),
            LossModel::Logistic { features, .. } | LossModel::Mlp { features, .. } => *features,
        }
    }

    /// Exact smoothness constant when known analytically.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            LossModel::Quadratic { curvature } => {
                Some(curvature.iter().fold(0.0_f64, |m, &a| m.max(a)))
            }
            _ => None,
        }
    }

    pub fn is_classifier(&self) -> bool {
        !matches!(self, LossModel::Quadratic { .. })
    }

    /// Initial parameters. Quadratic and logistic start at zero; the MLP draws
    /// every weight uniformly from `[−1/√fan_in, 1/√fan_in]`.
    pub fn init_params(&self, seed: u64) -> ParamVec {
        match self {
            LossModel::Quadratic { .. } | LossModel::Logistic { .. } => ParamVec::zeros(self.dim()),
            LossModel::Mlp {
                features,
                hidden,
                classes,
            } => {
                let mut rng = rng::stream(seed, Domain::Init, 0, 0);
                let mut v = Vec::with_capacity(self.dim());
                let b1 = 1.0 / (*features as f64).sqrt();
                for _ in 0..hidden * (features + 1) {
                    v.push(rng.random_range(-b1..=b1));
                }
                let b2 = 1.0 / (*hidden as f64).sqrt();
                for _ in 0..classes * (hidden + 1) {
                    v.push(rng.random_range(-b2..=b2));
                }
                ParamVec::from_vec(v)
            }
        }
    }

    fn check(&self, params: &ParamVec, data: &Dataset) -> Result<()> {
        params.check_dim(self.dim())?;
        if data.dim() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: data.dim(),
            });
        }
        if let Some(c) = self.classes() {
            if data.classes() > c {
                return Err(Error::config(format!(
                    "dataset has {} classes but model predicts {}",
                    data.classes(),
                    c
                )));
            }
        }
        Ok(())
    }

    fn classes(&self) -> Option<usize> {
        match self {
            LossModel::Quadratic { .. } => None,
            LossModel::Logistic { classes, .. } | LossModel::Mlp { classes, .. } => Some(*classes),
        }
    }

    /// Loss of one sample; when `grad` is given, adds `weight · ∇loss` to it.
    fn sample(&self, params: &[f64], x: &[f64], y: usize, grad: Option<(&mut [f64], f64)>) -> f64 {
        match self {
            LossModel::Quadratic { curvature } => {
                let mut loss = 0.0;
                match grad {
                    Some((g, w)) => {
                        for j in 0..curvature.len() {
                            let r = params[j] - x[j];
                            loss += curvature[j] * r * r;
                            g[j] += w * curvature[j] * r;
                        }
                    }
                    None => {
                        for j in 0..curvature.len() {
                            let r = params[j] - x[j];
                            loss += curvature[j] * r * r;
                        }
                    }
                }
                0.5 * loss
            }
            LossModel::Logistic { features, classes } => {
                let (f, c) = (*features, *classes);
                let bias = &params[c * f..];
                let mut logits: Vec<f64> = (0..c)
                    .map(|k| {
                        let w = &params[k * f..(k + 1) * f];
                        bias[k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                let loss = softmax_xent(&mut logits, y);
                if let Some((g, w)) = grad {
                    for k in 0..c {
                        let delta = w * (logits[k] - if k == y { 1.0 } else { 0.0 });
                        let row = &mut g[k * f..(k + 1) * f];
                        for (gj, xj) in row.iter_mut().zip(x) {
                            *gj += delta * xj;
                        }
                        g[c * f + k] += delta;
                    }
                }
                loss
            }
            LossModel::Mlp {
                features,
                hidden,
                classes,
            } => {
                let (f, h, c) = (*features, *hidden, *classes);
                let w1 = &params[..h * f];
                let b1 = &params[h * f..h * (f + 1)];
                let off2 = h * (f + 1);
                let w2 = &params[off2..off2 + c * h];
                let b2 = &params[off2 + c * h..];
                let act: Vec<f64> = (0..h)
                    .map(|u| {
                        let row = &w1[u * f..(u + 1) * f];
                        (b1[u] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh()
                    })
                    .collect();
                let mut logits: Vec<f64> = (0..c)
                    .map(|k| {
                        let row = &w2[k * h..(k + 1) * h];
                        b2[k] + row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                let loss = softmax_xent(&mut logits, y);
                if let Some((g, w)) = grad {
                    let mut back = vec![0.0; h];
                    for k in 0..c {
                        let delta = w * (logits[k] - if k == y { 1.0 } else { 0.0 });
                        let row = &w2[k * h..(k + 1) * h];
                        for u in 0..h {
                            g[off2 + k * h + u] += delta * act[u];
                            back[u] += delta * row[u];
                        }
                        g[off2 + c * h + k] += delta;
                    }
                    for u in 0..h {
                        let d1 = back[u] * (1.0 - act[u] * act[u]);
                        let row = &mut g[u * f..(u + 1) * f];
                        for (gj, xj) in row.iter_mut().zip(x) {
                            *gj += d1 * xj;
                        }
                        g[h * f + u] += d1;
                    }
                }
                loss
            }
        }
    }

    /// Mean loss over all samples.
    pub fn loss(&self, params: &ParamVec, data: &Dataset) -> Result<f64> {
        self.check(params, data)?;
        if data.is_empty() {
            return Err(Error::EmptyDataset { device: usize::MAX });
        }
        let total: f64 = (0..data.len())
            .map(|i| self.sample(params, data.row(i), data.label(i), None))
            .sum();
        Ok(total / data.len() as f64)
    }

    /// Mean loss and its exact gradient over the listed rows.
    pub fn loss_and_gradient(
        &self,
        params: &ParamVec,
        data: &Dataset,
        batch: &[usize],
    ) -> Result<(f64, ParamVec)> {
        self.check(params, data)?;
        if batch.is_empty() {
            return Err(Error::EmptyDataset { device: usize::MAX });
        }
        if let Some(&bad) = batch.iter().find(|&&i| i >= data.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: data.len(),
            });
        }
        let w = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.dim()];
        let mut loss = 0.0;
        for &i in batch {
            loss += self.sample(params, data.row(i), data.label(i), Some((&mut grad, w)));
        }
        Ok((loss * w, ParamVec::from_vec(grad)))
    }

    /// Class probabilities for one input row. `None` for the quadratic model
    /// or when `params` or `x` has the wrong length.
    pub fn predict(&self, params: &ParamVec, x: &[f64]) -> Option<Vec<f64>> {
        if params.dim() != self.dim() || x.len() != self.input_dim() {
            return None;
        }
        let mut logits = match self {
            LossModel::Quadratic { .. } => return None,
            LossModel::Logistic { features, classes } => {
                let (f, c) = (*features, *classes);
                (0..c)
                    .map(|k| {
                        params[c * f + k]
                            + params[k * f..(k + 1) * f]
                                .iter()
                                .zip(x)
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    })
                    .collect::<Vec<_>>()
            }
            LossModel::Mlp {
                features,
                hidden,
                classes,
            } => {
                let (f, h, c) = (*features, *hidden, *classes);
                let off2 = h * (f + 1);
                let act: Vec<f64> = (0..h)
                    .map(|u| {
                        (params[h * f + u]
                            + params[u * f..(u + 1) * f]
                                .iter()
                                .zip(x)
                                .map(|(a, b)| a * b)
                                .sum::<f64>())
                        .tanh()
                    })
                    .collect();
                (0..c)
                    .map(|k| {
                        params[off2 + c * h + k]
                            + params[off2 + k * h..off2 + (k + 1) * h]
                                .iter()
                                .zip(&act)
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    })
                    .collect()
            }
        };
        softmax_in_place(&mut logits);
        Some(logits)
    }

    /// Fraction of rows whose arg-max prediction equals the label.
    pub fn accuracy(&self, params: &ParamVec, data: &Dataset) -> Option<f64> {
        if !self.is_classifier() || data.is_empty() {
            return None;
        }
        let correct = (0..data.len())
            .filter(|&i| {
                let p = self.predict(params, data.row(i)).expect("classifier");
                argmax(&p) == data.label(i)
            })
            .count();
        Some(correct as f64 / data.len() as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        z += *l;
    }
    for l in logits.iter_mut() {
        *l /= z;
    }
}

/// Replaces `logits` with softmax probabilities and returns `−log p_y`.
fn softmax_xent(logits: &mut [f64], y: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        z += *l;
    }
    let log_p = (logits[y]).ln() - z.ln();
    for l in logits.iter_mut() {
        *l /= z;
    }
    -log_p
}

/// Exact mean gradient of the device objective over all its samples.
pub fn full_gradient(model: &LossModel, params: &ParamVec, data: &DeviceDataset) -> Result<ParamVec> {
    if data.is_empty() {
        return Err(Error::EmptyDataset {
            device: data.device_id,
        });
    }
    let all: Vec<usize> = (0..data.len()).collect();
    model
        .loss_and_gradient(params, &data.data, &all)
        .map(|(_, g)| g)
}

/// Mean gradient over exactly the listed rows.
pub fn stoch_gradient(
    model: &LossModel,
    params: &ParamVec,
    data: &DeviceDataset,
    batch: &[usize],
) -> Result<GradSample> {
    let (_, gradient) = model
        .loss_and_gradient(params, &data.data, batch)
        .map_err(|e| match e {
            Error::EmptyDataset { .. } => Error::EmptyDataset {
                device: data.device_id,
            },
            e => e,
        })?;
    Ok(GradSample {
        gradient,
        batch_ids: batch.to_vec(),
        device_id: data.device_id,
    })
}
