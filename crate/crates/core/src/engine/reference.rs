//! Directly coded loops for the special cases CE-FedAvg reduces to. They share
//! only the gradient sampler with the engine.

use nalgebra::DMatrix;

use super::run::sample_gradient;
use super::{ClusterLayout, RunConfig};
use crate::datagen::DeviceDataset;
use crate::error::Result;
use crate::numerics::{LossModel, ParamVec};

fn sgd_all(model: &LossModel, xs: &mut [ParamVec], data: &[DeviceDataset], c: &RunConfig, t: usize) -> Result<()> {
    for (k, x) in xs.iter_mut().enumerate() {
        let g = sample_gradient(model, x, &data[k], c.batch_size, c.noise_sigma_sq, c.seed, k, t)?;
        x.axpy(-c.lr, &g);
    }
    Ok(())
}

/// Decentralized local SGD: every device runs `q` local steps, then the
/// devices gossip `π` times with `h`. Returns the final device models.
pub fn decentralized_local_sgd(
    model: &LossModel,
    data: &[DeviceDataset],
    h: &DMatrix<f64>,
    c: &RunConfig,
    init: &ParamVec,
) -> Result<Vec<ParamVec>> {
    let n = data.len();
    let mut xs = vec![init.clone(); n];
    let steps = c.rounds * c.q * c.tau;
    for t in 0..steps {
        sgd_all(model, &mut xs, data, c, t)?;
        if (t + 1) % (c.q * c.tau) == 0 {
            for _ in 0..c.pi {
                let prev = xs.clone();
                for (i, x) in xs.iter_mut().enumerate() {
                    for j in 0..x.dim() {
                        x[j] = (0..n).map(|k| h[(k, i)] * prev[k][j]).sum();
                    }
                }
            }
        }
    }
    Ok(xs)
}

/// Hierarchical SGD: edge averages every `τ` steps, a cloud average of the
/// edge models every `qτ` steps. Returns the final device models.
pub fn hierarchical_sgd(
    model: &LossModel,
    data: &[DeviceDataset],
    layout: &ClusterLayout,
    c: &RunConfig,
    init: &ParamVec,
) -> Result<Vec<ParamVec>> {
    let n = data.len();
    let d = init.dim();
    let mut xs = vec![init.clone(); n];
    let steps = c.rounds * c.q * c.tau;
    for t in 0..steps {
        sgd_all(model, &mut xs, data, c, t)?;
        if (t + 1) % c.tau != 0 {
            continue;
        }
        let mut edges = Vec::with_capacity(layout.m());
        for members in layout.clusters() {
            let mut y = vec![0.0; d];
            for &k in members {
                for j in 0..d {
                    y[j] += xs[k][j];
                }
            }
            edges.push(y.into_iter().map(|v| v / members.len() as f64).collect::<Vec<f64>>());
        }
        if (t + 1) % (c.q * c.tau) == 0 {
            let mut g = vec![0.0; d];
            for y in &edges {
                for j in 0..d {
                    g[j] += y[j];
                }
            }
            let g: Vec<f64> = g.into_iter().map(|v| v / edges.len() as f64).collect();
            edges.iter_mut().for_each(|y| y.clone_from(&g));
        }
        for (k, x) in xs.iter_mut().enumerate() {
            *x = ParamVec::from_vec(edges[layout.cluster_of(k)].clone());
        }
    }
    Ok(xs)
}
