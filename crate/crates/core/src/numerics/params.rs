use serde::{Deserialize, Serialize};
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Flat model parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVec(Vec<f64>);

impl ParamVec {
    pub fn zeros(dim: usize) -> Self {
        ParamVec(vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVec(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::Dimension {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVec) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn dot(&self, other: &ParamVec) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &ParamVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn sub(&self, other: &ParamVec) -> ParamVec {
        ParamVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Weighted sum `Σ w_k x_k`, accumulated in slice order. The first term
    /// seeds the accumulator so a single unit weight reproduces its input
    /// bit for bit.
    pub fn weighted_sum<'a, I>(terms: I) -> Option<ParamVec>
    where
        I: IntoIterator<Item = (f64, &'a ParamVec)>,
    {
        let mut iter = terms.into_iter();
        let (w0, x0) = iter.next()?;
        let mut acc: Vec<f64> = x0.0.iter().map(|v| w0 * v).collect();
        for (w, x) in iter {
            for (a, v) in acc.iter_mut().zip(&x.0) {
                *a += w * v;
            }
        }
        Some(ParamVec(acc))
    }

    /// Unweighted arithmetic mean.
    pub fn mean<'a, I>(items: I) -> Option<ParamVec>
    where
        I: IntoIterator<Item = &'a ParamVec>,
    {
        let items: Vec<&ParamVec> = items.into_iter().collect();
        let w = 1.0 / items.len() as f64;
        ParamVec::weighted_sum(items.into_iter().map(|x| (w, x)))
    }
}

impl Deref for ParamVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVec {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVec {
    fn from(v: Vec<f64>) -> Self {
        ParamVec(v)
    }
}
