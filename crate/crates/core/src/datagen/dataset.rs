use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major labeled sample matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::invariant(format!(
                "{} feature values do not form {} rows of width {}",
                features.len(),
                labels.len(),
                dim
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invariant(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            classes,
        })
    }

    pub fn empty(dim: usize, classes: usize) -> Self {
        Dataset {
            features: Vec::new(),
            dim,
            labels: Vec::new(),
            classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            dim: self.dim,
            labels,
            classes: self.classes,
        }
    }

    /// Concatenation of several datasets of identical shape.
    pub fn concat<'a, I: IntoIterator<Item = &'a Dataset>>(parts: I) -> Option<Dataset> {
        let mut iter = parts.into_iter();
        let mut out = iter.next()?.clone();
        for p in iter {
            debug_assert_eq!(p.dim, out.dim);
            out.features.extend_from_slice(&p.features);
            out.labels.extend_from_slice(&p.labels);
            out.classes = out.classes.max(p.classes);
        }
        Some(out)
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

/// The training data held by one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDataset {
    pub device_id: usize,
    pub data: Dataset,
    /// Row indices into the source dataset, when the device data came from a
    /// partition. Empty for synthesized per-device data.
    pub source_indices: Vec<usize>,
}

impl DeviceDataset {
    pub fn new(device_id: usize, data: Dataset) -> Self {
        DeviceDataset {
            device_id,
            data,
            source_indices: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
