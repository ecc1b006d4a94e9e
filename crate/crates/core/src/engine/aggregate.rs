use nalgebra::DMatrix;

use super::{ClusterLayout, Weighting};
use crate::datagen::DeviceDataset;
use crate::numerics::ParamVec;

/// Weighted average of device models, accumulated in the given order.
/// `weights` must already be normalized.
pub fn intra_aggregate(params: &[&ParamVec], weights: &[f64]) -> ParamVec {
    assert!(!params.is_empty(), "aggregating an empty cluster");
    debug_assert_eq!(params.len(), weights.len());
    ParamVec::weighted_sum(weights.iter().copied().zip(params.iter().copied()))
        .expect("non-empty")
}

/// `y_new[i] = Σ_j gossip[(j, i)] · y[j]`, with `gossip` the precomputed `H^π`.
pub fn inter_aggregate(edges: &[ParamVec], gossip: &DMatrix<f64>) -> Vec<ParamVec> {
    debug_assert_eq!(edges.len(), gossip.nrows());
    (0..edges.len())
        .map(|i| {
            ParamVec::weighted_sum(edges.iter().enumerate().map(|(j, y)| (gossip[(j, i)], y)))
                .expect("non-empty")
        })
        .collect()
}

/// Normalized averaging weights for `members` (ascending device ids).
pub fn member_weights(members: &[usize], data: &[DeviceDataset], weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Uniform => vec![1.0 / members.len() as f64; members.len()],
        Weighting::SampleSize => {
            let total: usize = members.iter().map(|&k| data[k].len()).sum();
            members
                .iter()
                .map(|&k| data[k].len() as f64 / total as f64)
                .collect()
        }
    }
}

pub(crate) struct AggregationWeights {
    pub per_cluster: Vec<Vec<f64>>,
    pub global: Vec<f64>,
}

impl AggregationWeights {
    pub fn new(layout: &ClusterLayout, data: &[DeviceDataset], weighting: Weighting) -> Self {
        let all: Vec<usize> = (0..layout.n()).collect();
        AggregationWeights {
            per_cluster: layout
                .clusters()
                .iter()
                .map(|c| member_weights(c, data, weighting))
                .collect(),
            global: member_weights(&all, data, weighting),
        }
    }
}
