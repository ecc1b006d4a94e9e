use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Assignment of `n` devices to `m` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLayout {
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
}

impl ClusterLayout {
    /// Builds the layout from `assignment[k] = cluster of device k`. Every
    /// cluster in `0..m` must be non-empty.
    pub fn from_assignment(m: usize, assignment: Vec<usize>) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("need at least one cluster"));
        }
        let mut clusters = vec![Vec::new(); m];
        for (k, &c) in assignment.iter().enumerate() {
            if c >= m {
                return Err(Error::config(format!("device {k} assigned to cluster {c} ≥ m = {m}")));
            }
            clusters[c].push(k);
        }
        if let Some(i) = clusters.iter().position(|c| c.is_empty()) {
            return Err(Error::config(format!("cluster {i} has no devices")));
        }
        Ok(ClusterLayout {
            assignment,
            clusters,
        })
    }

    /// Devices numbered cluster by cluster, sizes as equal as possible (the
    /// first `n mod m` clusters get one extra device).
    pub fn contiguous(n: usize, m: usize) -> Result<Self> {
        if m == 0 || n < m {
            return Err(Error::config(format!("cannot split {n} devices into {m} non-empty clusters")));
        }
        let (base, extra) = (n / m, n % m);
        let mut assignment = Vec::with_capacity(n);
        for i in 0..m {
            let size = base + usize::from(i < extra);
            assignment.extend(std::iter::repeat_n(i, size));
        }
        Self::from_assignment(m, assignment)
    }

    /// Balanced cluster sizes with devices shuffled among clusters.
    pub fn random_balanced(n: usize, m: usize, seed: u64) -> Result<Self> {
        let base = Self::contiguous(n, m)?;
        let mut assignment = base.assignment;
        assignment.shuffle(&mut rng::stream(seed, Domain::Layout, 0, 0));
        Self::from_assignment(m, assignment)
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn m(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self, device: usize) -> usize {
        self.assignment[device]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Devices of cluster `i` in ascending id order.
    pub fn members(&self, i: usize) -> &[usize] {
        &self.clusters[i]
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    pub fn equal_sizes(&self) -> bool {
        self.clusters.iter().all(|c| c.len() == self.clusters[0].len())
    }
}
