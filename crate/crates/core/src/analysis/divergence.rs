use serde::{Deserialize, Serialize};

use crate::datagen::DeviceDataset;
use crate::engine::{global_gradient, global_loss, sample_batch, ClusterLayout, Observer, RunOutput, StepView};
use crate::error::{Error, Result};
use crate::numerics::{full_gradient, stoch_gradient, LossModel, ParamVec};
use crate::par;
use crate::rng::{self, Domain};

/// Trajectory points used as probes besides the initial model.
pub const DEFAULT_PROBES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDivergence {
    pub eps_sq: f64,
    pub eps_i_sq: Vec<f64>,
    pub eps_hat_sq: f64,
    /// `|ε̂² − ε² − Σ (n_i/n) ε_i²|`.
    pub residual: f64,
}

/// Maxima over the probe set. These are lower estimates of the suprema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub eps_sq: f64,
    pub eps_i_sq: Vec<f64>,
    pub eps_hat_sq: f64,
    pub max_residual: f64,
    pub probes: Vec<ParamVec>,
    pub per_probe: Vec<ProbeDivergence>,
}

/// Divergences at one point from full-batch gradients. Cluster objectives are
/// uniform averages of their devices' objectives.
pub fn divergences_at(
    model: &LossModel,
    data: &[DeviceDataset],
    layout: &ClusterLayout,
    x: &ParamVec,
) -> Result<ProbeDivergence> {
    if data.len() != layout.n() {
        return Err(Error::config(format!(
            "layout has {} devices but {} datasets were given",
            layout.n(),
            data.len()
        )));
    }
    let grads: Vec<ParamVec> = par::map_range(data.len(), |k| full_gradient(model, x, &data[k]))
        .into_iter()
        .collect::<Result<_>>()?;
    let n = layout.n() as f64;
    let global = ParamVec::mean(&grads).expect("non-empty");
    let eps_hat_sq = grads.iter().map(|g| g.dist_sq(&global)).sum::<f64>() / n;
    let mut eps_sq = 0.0;
    let mut eps_i_sq = Vec::with_capacity(layout.m());
    let mut weighted_intra = 0.0;
    for members in layout.clusters() {
        let ni = members.len() as f64;
        let cluster = ParamVec::mean(members.iter().map(|&k| &grads[k])).expect("non-empty cluster");
        let intra = members.iter().map(|&k| grads[k].dist_sq(&cluster)).sum::<f64>() / ni;
        eps_sq += ni / n * cluster.dist_sq(&global);
        weighted_intra += ni / n * intra;
        eps_i_sq.push(intra);
    }
    Ok(ProbeDivergence {
        eps_sq,
        eps_i_sq,
        eps_hat_sq,
        residual: (eps_hat_sq - eps_sq - weighted_intra).abs(),
    })
}

pub fn estimate_divergences(
    model: &LossModel,
    data: &[DeviceDataset],
    layout: &ClusterLayout,
    probes: &[ParamVec],
) -> Result<DivergenceReport> {
    if probes.is_empty() {
        return Err(Error::config("divergence estimation needs at least one probe point"));
    }
    let per_probe: Vec<ProbeDivergence> = probes
        .iter()
        .map(|x| divergences_at(model, data, layout, x))
        .collect::<Result<_>>()?;
    let mut eps_i_sq = vec![0.0_f64; layout.m()];
    for p in &per_probe {
        for (acc, v) in eps_i_sq.iter_mut().zip(&p.eps_i_sq) {
            *acc = acc.max(*v);
        }
    }
    let max = |f: fn(&ProbeDivergence) -> f64| per_probe.iter().map(f).fold(0.0, f64::max);
    Ok(DivergenceReport {
        eps_sq: max(|p| p.eps_sq),
        eps_hat_sq: max(|p| p.eps_hat_sq),
        max_residual: max(|p| p.residual),
        eps_i_sq,
        probes: probes.to_vec(),
        per_probe,
    })
}

/// The origin, the initial model, and up to `count` round averages spread
/// evenly over the run.
pub fn probe_points(run: &RunOutput, count: usize) -> Vec<ParamVec> {
    let mut out = vec![ParamVec::zeros(run.initial.dim())];
    if run.initial.iter().any(|&v| v != 0.0) {
        out.push(run.initial.clone());
    }
    let r = run.round_averages.len();
    let take = count.min(r);
    for i in 0..take {
        let idx = if take == 1 { r - 1 } else { i * (r - 1) / (take - 1) };
        out.push(run.round_averages[idx].clone());
    }
    out
}

/// Mean of `‖g − ∇F_k(x)‖²` over devices and `trials` sampled batches.
pub fn estimate_sigma_sq(
    model: &LossModel,
    params: &ParamVec,
    data: &[DeviceDataset],
    batch_size: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < 2 {
        return Err(Error::config("sigma estimation needs at least two trials"));
    }
    if batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let per_device: Vec<Result<f64>> = par::map_range(data.len(), |k| {
        let full = full_gradient(model, params, &data[k])?;
        let mut total = 0.0;
        for trial in 0..trials {
            let mut r = rng::stream(seed, Domain::Probe, k as u64, trial as u64);
            let batch = sample_batch(&mut r, data[k].len(), batch_size);
            total += stoch_gradient(model, params, &data[k], &batch)?.gradient.dist_sq(&full);
        }
        Ok(total / trials as f64)
    });
    let mut sum = 0.0;
    for v in per_device {
        sum += v?;
    }
    Ok(sum / data.len() as f64)
}

/// Exact for quadratics; otherwise the largest gradient-difference ratio
/// `‖∇F(x) − ∇F(x′)‖ / ‖x − x′‖` over probe pairs.
pub fn estimate_smoothness(model: &LossModel, data: &[DeviceDataset], probes: &[ParamVec]) -> Result<f64> {
    if let Some(l) = model.smoothness() {
        return Ok(l);
    }
    let grads: Vec<ParamVec> = probes
        .iter()
        .map(|x| global_gradient(model, x, data))
        .collect::<Result<_>>()?;
    let mut best = 0.0_f64;
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            let dx = probes[i].dist_sq(&probes[j]).sqrt();
            if dx > 0.0 {
                best = best.max(grads[i].dist_sq(&grads[j]).sqrt() / dx);
            }
        }
    }
    if best == 0.0 {
        return Err(Error::config("smoothness estimate needs at least two distinct probes"));
    }
    Ok(best)
}

/// `F_inf`: exact for quadratics (the minimizer is the mean of the device
/// sample means); otherwise the lowest loss seen in `steps` full-batch
/// gradient steps of size `lr` from `init`.
pub fn estimate_f_inf(model: &LossModel, data: &[DeviceDataset], init: &ParamVec, lr: f64, steps: usize) -> Result<f64> {
    if let LossModel::Quadratic { .. } = model {
        let d = model.dim();
        let means: Vec<ParamVec> = data
            .iter()
            .map(|dev| {
                let mut m = vec![0.0; d];
                for i in 0..dev.len() {
                    for (acc, v) in m.iter_mut().zip(dev.data.row(i)) {
                        *acc += v / dev.len() as f64;
                    }
                }
                ParamVec::from_vec(m)
            })
            .collect();
        let xstar = ParamVec::mean(&means).ok_or_else(|| Error::config("no devices"))?;
        return global_loss(model, &xstar, data);
    }
    let mut x = init.clone();
    let mut best = global_loss(model, &x, data)?;
    for _ in 0..steps {
        let g = global_gradient(model, &x, data)?;
        x.axpy(-lr, &g);
        let f = global_loss(model, &x, data)?;
        if !f.is_finite() {
            break;
        }
        best = best.min(f);
    }
    Ok(best)
}

/// Collects `‖∇F(u_t)‖²` at every iteration of an observed run.
pub struct GradNormObserver<'a> {
    model: &'a LossModel,
    data: &'a [DeviceDataset],
    pub values: Vec<f64>,
    pub error: Option<Error>,
}

impl<'a> GradNormObserver<'a> {
    pub fn new(model: &'a LossModel, data: &'a [DeviceDataset]) -> Self {
        GradNormObserver {
            model,
            data,
            values: Vec::new(),
            error: None,
        }
    }

    fn push(&mut self, xs: &[ParamVec]) {
        let u = ParamVec::mean(xs).expect("non-empty");
        match global_gradient(self.model, &u, self.data) {
            Ok(g) => self.values.push(g.norm_sq()),
            Err(e) => self.error = Some(e),
        }
    }

    /// `(1/T) Σ_{t<T} ‖∇F(u_t)‖²`, starting from the initial model.
    pub fn average(&self) -> f64 {
        let t = self.values.len().saturating_sub(1).max(1);
        self.values.iter().take(t).sum::<f64>() / t as f64
    }
}

impl Observer for GradNormObserver<'_> {
    fn on_start(&mut self, initial: &[ParamVec]) {
        self.push(initial);
    }

    fn on_step(&mut self, view: &StepView<'_>) {
        self.push(view.after);
    }
}
