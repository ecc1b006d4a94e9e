#![allow(dead_code)]

use cfel_core::datagen::{make_quadratic_fleet, DeviceDataset};
use cfel_core::engine::{Algorithm, ClusterLayout, RunConfig};
use cfel_core::numerics::LossModel;
use cfel_core::topology::{build_graph, GraphKind, MixingMatrix};

/// A small quadratic problem with several samples per device so mini-batches
/// are genuinely random.
pub struct Bench {
    pub layout: ClusterLayout,
    pub model: LossModel,
    pub data: Vec<DeviceDataset>,
    pub mixing: MixingMatrix,
}

pub fn quadratic_bench(n: usize, m: usize, d: usize, graph: GraphKind, seed: u64) -> Bench {
    let fleet = make_quadratic_fleet(n, d, 1.0, seed).unwrap();
    Bench {
        layout: ClusterLayout::contiguous(n, m).unwrap(),
        model: LossModel::quadratic(d),
        data: fleet.device_datasets(5, 0.5, seed).unwrap(),
        mixing: MixingMatrix::metropolis(&build_graph(graph, m, seed).unwrap()).unwrap(),
    }
}

pub fn config(alg: Algorithm, tau: usize, q: usize, pi: usize, rounds: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(alg, tau, q, pi, 0.05, rounds);
    c.batch_size = 2;
    c.noise_sigma_sq = 0.1;
    c.seed = seed;
    c
}
