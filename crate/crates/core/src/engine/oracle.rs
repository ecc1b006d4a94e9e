//! The run expressed as explicit matrix products, `X_{t+1} = (X_t − ηG_t) W_t`,
//! where `X_t` is `d × n` with device `k` in column `k`.

use nalgebra::DMatrix;

use super::run::sample_gradient;
use super::{Algorithm, ClusterLayout, RunConfig, Simulation, Weighting};
use crate::error::{Error, Result};
use crate::numerics::ParamVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Identity,
    /// Intra-cluster block averaging `V = CB`.
    V,
    /// Intra-cluster averaging plus gossip, `Z = C H^π B`.
    Z,
}

/// `W_t`: `Z` when `(t+1) mod qτ = 0`, `V` when `(t+1) mod τ = 0`, else `I`.
pub fn operator_at(t: usize, tau: usize, q: usize) -> Operator {
    if (t + 1).is_multiple_of(q * tau) {
        Operator::Z
    } else if (t + 1).is_multiple_of(tau) {
        Operator::V
    } else {
        Operator::Identity
    }
}

/// `B` (`m × n`): `b_ik = 1` when device `k` belongs to cluster `i`.
pub fn membership_matrix(layout: &ClusterLayout) -> DMatrix<f64> {
    DMatrix::from_fn(layout.m(), layout.n(), |i, k| {
        if layout.cluster_of(k) == i {
            1.0
        } else {
            0.0
        }
    })
}

/// `C` (`n × m`): `c_ki = 1/n_i` when device `k` belongs to cluster `i`.
pub fn averaging_matrix(layout: &ClusterLayout) -> DMatrix<f64> {
    let sizes = layout.sizes();
    DMatrix::from_fn(layout.n(), layout.m(), |k, i| {
        if layout.cluster_of(k) == i {
            1.0 / sizes[i] as f64
        } else {
            0.0
        }
    })
}

/// The `V` and `Z` operators for `algorithm`. For the baselines the `Z` slot
/// holds whatever happens at a global-round boundary.
pub fn operators(
    algorithm: Algorithm,
    layout: &ClusterLayout,
    gossip: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = layout.n();
    let b = membership_matrix(layout);
    let c = averaging_matrix(layout);
    let v = &c * &b;
    let global = DMatrix::from_element(n, n, 1.0 / n as f64);
    let z = match algorithm {
        Algorithm::CeFedavg => {
            let h = gossip.ok_or_else(|| Error::config("ce_fedavg needs a mixing matrix"))?;
            &c * h * &b
        }
        Algorithm::Fedavg | Algorithm::HierFavg => global,
        Algorithm::LocalEdge => v.clone(),
    };
    let v = match algorithm {
        Algorithm::Fedavg => DMatrix::identity(n, n),
        _ => v,
    };
    Ok((v, z))
}

/// Replays `sim` through the matrix recursion and returns `X_0, …, X_T`.
pub fn run_matrix_oracle(sim: &Simulation<'_>) -> Result<Vec<DMatrix<f64>>> {
    sim.validate()?;
    let c: &RunConfig = sim.config;
    if c.momentum != 0.0 || c.weighting != Weighting::Uniform {
        return Err(Error::config("the matrix oracle covers plain SGD with uniform weighting"));
    }
    if c.tau_unit != super::TauUnit::Iterations {
        return Err(Error::config("the matrix oracle runs in iteration mode"));
    }
    let n = sim.layout.n();
    let init = match sim.init {
        Some(x) => x.clone(),
        None => sim.model.init_params(c.seed),
    };
    let d = init.dim();
    let gossip = sim.mixing.map(|h| h.power(c.pi));
    let (v, z) = operators(c.algorithm, sim.layout, gossip.as_ref())?;

    let mut x = DMatrix::from_fn(d, n, |j, _| init[j]);
    let mut states = Vec::with_capacity(c.total_iterations() + 1);
    states.push(x.clone());
    for t in 0..c.total_iterations() {
        let mut g = DMatrix::zeros(d, n);
        for k in 0..n {
            let xk = ParamVec::from_vec(x.column(k).iter().copied().collect());
            let gk = sample_gradient(sim.model, &xk, &sim.train[k], c.batch_size, c.noise_sigma_sq, c.seed, k, t)?;
            g.set_column(k, &nalgebra::DVector::from_column_slice(&gk));
        }
        let stepped = &x - c.lr * g;
        x = match operator_at(t, c.tau, c.q) {
            Operator::Identity => stepped,
            Operator::V => stepped * &v,
            Operator::Z => stepped * &z,
        };
        states.push(x.clone());
    }
    Ok(states)
}

/// Column `k` of a `d × n` state as a parameter vector.
pub fn column(x: &DMatrix<f64>, k: usize) -> ParamVec {
    ParamVec::from_vec(x.column(k).iter().copied().collect())
}

/// `max_j |u_{t+1} − u_t + (η/n) Σ_k g_k|_j` for one step, `u` the uniform
/// device average.
pub fn average_step_residual(before: &[ParamVec], after: &[ParamVec], grads: &[ParamVec], lr: f64) -> f64 {
    let n = before.len() as f64;
    let u0 = ParamVec::mean(before).expect("non-empty");
    let u1 = ParamVec::mean(after).expect("non-empty");
    let gsum = ParamVec::weighted_sum(grads.iter().map(|g| (1.0, g))).expect("non-empty");
    (0..u0.dim())
        .map(|j| (u1[j] - u0[j] + lr / n * gsum[j]).abs())
        .fold(0.0, f64::max)
}
