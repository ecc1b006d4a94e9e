use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::aggregate::{inter_aggregate, intra_aggregate, AggregationWeights};
use super::{Algorithm, ClusterLayout, RoundRecord, RunConfig, TauUnit};
use crate::costmodel::{self, SystemProfile};
use crate::datagen::{Dataset, DeviceDataset};
use crate::error::{Error, Result};
use crate::numerics::{apply_momentum, full_gradient, stoch_gradient, LossModel, ParamVec};
use crate::par;
use crate::rng::{self, Domain};
use crate::topology::MixingMatrix;

/// Any parameter beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Communication applied after a local step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationOp {
    None,
    /// Each edge server averages its devices.
    Intra,
    /// Intra-cluster average followed by `π` gossip steps between servers.
    IntraGossip,
    /// One average over every device (cloud aggregation).
    Global,
}

/// Everything one run needs. Device `k`'s data is `train[k]`.
#[derive(Clone, Copy)]
pub struct Simulation<'a> {
    pub config: &'a RunConfig,
    pub layout: &'a ClusterLayout,
    pub model: &'a LossModel,
    pub train: &'a [DeviceDataset],
    pub mixing: Option<&'a MixingMatrix>,
    pub test: Option<&'a Dataset>,
    pub profile: Option<&'a SystemProfile>,
    pub init: Option<&'a ParamVec>,
}

/// Per-step view handed to an [`Observer`] (iteration mode only).
pub struct StepView<'a> {
    /// Global iteration index; the step moves `X_t` to `X_{t+1}`.
    pub t: usize,
    pub op: AggregationOp,
    pub grads: &'a [ParamVec],
    /// `X_t − ηG_t`, before any communication.
    pub before: &'a [ParamVec],
    /// `X_{t+1}`, after aggregation and broadcast.
    pub after: &'a [ParamVec],
}

pub trait Observer {
    fn on_start(&mut self, _initial: &[ParamVec]) {}
    fn on_step(&mut self, view: &StepView<'_>);
}

/// Keeps every `X_t` (and `G_t`) of a run.
#[derive(Debug, Default, Clone)]
pub struct TrajectoryRecorder {
    pub states: Vec<Vec<ParamVec>>,
    pub grads: Vec<Vec<ParamVec>>,
    pub before: Vec<Vec<ParamVec>>,
    pub ops: Vec<AggregationOp>,
}

impl Observer for TrajectoryRecorder {
    fn on_start(&mut self, initial: &[ParamVec]) {
        self.states.push(initial.to_vec());
    }

    fn on_step(&mut self, view: &StepView<'_>) {
        self.grads.push(view.grads.to_vec());
        self.before.push(view.before.to_vec());
        self.states.push(view.after.to_vec());
        self.ops.push(view.op);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub initial: ParamVec,
    pub edge_params: Vec<ParamVec>,
    pub device_params: Vec<ParamVec>,
    /// Device-average model at the end of every global round.
    pub round_averages: Vec<ParamVec>,
}

/// Indices of one mini-batch: the full dataset when `batch_size ≥ len`,
/// otherwise `batch_size` uniform draws with replacement.
pub fn sample_batch(rng: &mut ChaCha8Rng, len: usize, batch_size: usize) -> Vec<usize> {
    if batch_size >= len {
        (0..len).collect()
    } else {
        (0..batch_size).map(|_| rng.random_range(0..len)).collect()
    }
}

fn add_noise(g: &mut ParamVec, sigma_sq: f64, seed: u64, device: usize, key: u64) {
    if sigma_sq == 0.0 {
        return;
    }
    let std = (sigma_sq / g.dim() as f64).sqrt();
    let mut r = rng::stream(seed, Domain::Noise, device as u64, key);
    for v in g.iter_mut() {
        *v += std * r.sample::<f64, _>(StandardNormal);
    }
}

/// The stochastic gradient device `k` uses at global iteration `t` in
/// iteration mode: batch from stream `(seed, k, t)`, plus optional noise.
#[allow(clippy::too_many_arguments)]
pub fn sample_gradient(
    model: &LossModel,
    params: &ParamVec,
    data: &DeviceDataset,
    batch_size: usize,
    noise_sigma_sq: f64,
    seed: u64,
    device: usize,
    t: usize,
) -> Result<ParamVec> {
    let mut r = rng::stream(seed, Domain::Batch, device as u64, t as u64);
    let batch = sample_batch(&mut r, data.len(), batch_size);
    let mut g = stoch_gradient(model, params, data, &batch)?.gradient;
    add_noise(&mut g, noise_sigma_sq, seed, device, t as u64);
    Ok(g)
}

/// Mean loss over devices, `F(x) = (1/n) Σ_k F_k(x)`.
pub fn global_loss(model: &LossModel, params: &ParamVec, data: &[DeviceDataset]) -> Result<f64> {
    let mut total = 0.0;
    for d in data {
        total += model.loss(params, &d.data)?;
    }
    Ok(total / data.len() as f64)
}

/// `∇F(x) = (1/n) Σ_k ∇F_k(x)`, summed in device order.
pub fn global_gradient(model: &LossModel, params: &ParamVec, data: &[DeviceDataset]) -> Result<ParamVec> {
    let grads = par::map_range(data.len(), |k| full_gradient(model, params, &data[k]));
    let grads: Vec<ParamVec> = grads.into_iter().collect::<Result<_>>()?;
    let w = 1.0 / data.len() as f64;
    Ok(ParamVec::weighted_sum(grads.iter().map(|g| (w, g))).expect("at least one device"))
}

struct Device {
    x: ParamVec,
    v: ParamVec,
    grad: ParamVec,
    failed: Option<Result<usize>>,
}

impl<'a> Simulation<'a> {
    pub fn new(config: &'a RunConfig, layout: &'a ClusterLayout, model: &'a LossModel, train: &'a [DeviceDataset]) -> Self {
        Simulation {
            config,
            layout,
            model,
            train,
            mixing: None,
            test: None,
            profile: None,
            init: None,
        }
    }

    pub fn with_mixing(mut self, mixing: &'a MixingMatrix) -> Self {
        self.mixing = Some(mixing);
        self
    }

    pub fn with_test(mut self, test: &'a Dataset) -> Self {
        self.test = Some(test);
        self
    }

    pub fn with_profile(mut self, profile: &'a SystemProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn with_init(mut self, init: &'a ParamVec) -> Self {
        self.init = Some(init);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let n = self.layout.n();
        if self.train.len() != n {
            return Err(Error::config(format!(
                "layout has {n} devices but {} device datasets were given",
                self.train.len()
            )));
        }
        for (k, d) in self.train.iter().enumerate() {
            if d.is_empty() {
                return Err(Error::EmptyDataset { device: k });
            }
            if d.data.dim() != self.model.input_dim() {
                return Err(Error::Dimension {
                    expected: self.model.input_dim(),
                    got: d.data.dim(),
                });
            }
        }
        if self.config.algorithm == Algorithm::CeFedavg {
            let h = self
                .mixing
                .ok_or_else(|| Error::config("ce_fedavg needs a mixing matrix"))?;
            if h.m() != self.layout.m() {
                return Err(Error::config(format!(
                    "mixing matrix is {}×{} but the layout has {} clusters",
                    h.m(),
                    h.m(),
                    self.layout.m()
                )));
            }
        }
        if let Some(init) = self.init {
            init.check_dim(self.model.dim())?;
        }
        if let Some(p) = self.profile {
            p.validate()?;
            if p.device_flops.len() != n {
                return Err(Error::config(format!(
                    "system profile lists {} devices, layout has {n}",
                    p.device_flops.len()
                )));
            }
        }
        Ok(())
    }

    fn op_after_edge_round(&self, last: bool) -> AggregationOp {
        match (self.config.algorithm, last) {
            (Algorithm::CeFedavg, true) => AggregationOp::IntraGossip,
            (Algorithm::CeFedavg, false) => AggregationOp::Intra,
            (Algorithm::Fedavg, true) => AggregationOp::Global,
            (Algorithm::Fedavg, false) => AggregationOp::None,
            (Algorithm::HierFavg, true) => AggregationOp::Global,
            (Algorithm::HierFavg, false) => AggregationOp::Intra,
            (Algorithm::LocalEdge, _) => AggregationOp::Intra,
        }
    }

    fn round_seconds(&self) -> Result<f64> {
        let Some(profile) = self.profile else {
            return Ok(0.0);
        };
        let c = self.config;
        match c.tau_unit {
            TauUnit::Iterations => costmodel::round_time(c.algorithm, profile, c.tau, c.q, c.pi),
            TauUnit::Epochs => {
                let steps: Vec<usize> = self
                    .train
                    .iter()
                    .map(|d| c.q * c.tau * d.len().div_ceil(c.batch_size))
                    .collect();
                costmodel::round_time_with_steps(c.algorithm, profile, &steps, c.q, c.pi)
            }
        }
    }

    pub fn run(&self) -> Result<RunOutput> {
        self.run_inner(None)
    }

    /// Runs with a per-step observer. Observers only see steps in iteration
    /// mode.
    pub fn run_observed(&self, observer: &mut dyn Observer) -> Result<RunOutput> {
        self.run_inner(Some(observer))
    }

    fn run_inner(&self, mut observer: Option<&mut dyn Observer>) -> Result<RunOutput> {
        self.validate()?;
        let c = self.config;
        let (n, m) = (self.layout.n(), self.layout.m());
        let initial = match self.init {
            Some(x) => x.clone(),
            None => self.model.init_params(c.seed),
        };
        let dim = initial.dim();
        let weights = AggregationWeights::new(self.layout, self.train, c.weighting);
        let gossip = self.mixing.map(|h| h.power(c.pi));
        let round_seconds = self.round_seconds()?;

        let mut edges = vec![initial.clone(); m];
        let mut devices: Vec<Device> = (0..n)
            .map(|_| Device {
                x: initial.clone(),
                v: ParamVec::zeros(dim),
                grad: ParamVec::zeros(dim),
                failed: None,
            })
            .collect();
        if let Some(obs) = observer.as_deref_mut() {
            obs.on_start(&vec![initial.clone(); n]);
        }

        let mut records = Vec::with_capacity(c.rounds);
        let mut round_averages = Vec::with_capacity(c.rounds);
        let mut clock = 0.0;
        for l in 0..c.rounds {
            for r in 0..c.q {
                let op = self.op_after_edge_round(r + 1 == c.q);
                match c.tau_unit {
                    TauUnit::Iterations => {
                        for s in 0..c.tau {
                            let t = (l * c.q + r) * c.tau + s;
                            self.local_step(&mut devices, t);
                            self.check_failures(&devices, l, r)?;
                            let step_op = if s + 1 == c.tau { op } else { AggregationOp::None };
                            match observer.as_deref_mut() {
                                Some(obs) => {
                                    let before: Vec<ParamVec> = devices.iter().map(|d| d.x.clone()).collect();
                                    self.aggregate(step_op, &mut devices, &mut edges, &weights, gossip.as_ref());
                                    let grads: Vec<ParamVec> = devices.iter().map(|d| d.grad.clone()).collect();
                                    let after: Vec<ParamVec> = devices.iter().map(|d| d.x.clone()).collect();
                                    obs.on_step(&StepView {
                                        t,
                                        op: step_op,
                                        grads: &grads,
                                        before: &before,
                                        after: &after,
                                    });
                                }
                                None => {
                                    self.aggregate(step_op, &mut devices, &mut edges, &weights, gossip.as_ref())
                                }
                            }
                        }
                    }
                    TauUnit::Epochs => {
                        self.local_epochs(&mut devices, l * c.q + r);
                        self.check_failures(&devices, l, r)?;
                        self.aggregate(op, &mut devices, &mut edges, &weights, gossip.as_ref());
                    }
                }
            }
            clock += round_seconds;
            let (record, u) = self.evaluate(l, clock, &edges, &devices)?;
            records.push(record);
            round_averages.push(u);
        }
        Ok(RunOutput {
            records,
            initial,
            edge_params: edges,
            device_params: devices.into_iter().map(|d| d.x).collect(),
            round_averages,
        })
    }

    fn local_step(&self, devices: &mut [Device], t: usize) {
        let c = self.config;
        par::for_each_mut(devices, |k, dev| {
            if dev.failed.is_some() {
                return;
            }
            match sample_gradient(self.model, &dev.x, &self.train[k], c.batch_size, c.noise_sigma_sq, c.seed, k, t) {
                Ok(g) => {
                    dev.grad = g;
                    apply_momentum(&mut dev.x, &mut dev.v, &dev.grad, c.lr, c.momentum);
                    if !dev.x.is_finite() || dev.x.max_abs() > DIVERGENCE_LIMIT {
                        dev.failed = Some(Ok(t % c.tau));
                    }
                }
                Err(e) => dev.failed = Some(Err(e)),
            }
        });
    }

    /// `τ` shuffled sweeps per device; epoch keys are `(edge round, e)`.
    fn local_epochs(&self, devices: &mut [Device], edge_round: usize) {
        let c = self.config;
        par::for_each_mut(devices, |k, dev| {
            let data = &self.train[k];
            let mut step = 0;
            for e in 0..c.tau {
                let key = (edge_round * c.tau + e) as u64;
                let mut order: Vec<usize> = (0..data.len()).collect();
                order.shuffle(&mut rng::stream(c.seed, Domain::Epoch, k as u64, key));
                for (b, batch) in order.chunks(c.batch_size).enumerate() {
                    match stoch_gradient(self.model, &dev.x, data, batch) {
                        Ok(g) => {
                            dev.grad = g.gradient;
                            add_noise(&mut dev.grad, c.noise_sigma_sq, c.seed, k, (key << 32) | b as u64);
                            apply_momentum(&mut dev.x, &mut dev.v, &dev.grad, c.lr, c.momentum);
                            if !dev.x.is_finite() || dev.x.max_abs() > DIVERGENCE_LIMIT {
                                dev.failed = Some(Ok(step));
                                return;
                            }
                        }
                        Err(e) => {
                            dev.failed = Some(Err(e));
                            return;
                        }
                    }
                    step += 1;
                }
            }
        });
    }

    fn check_failures(&self, devices: &[Device], l: usize, r: usize) -> Result<()> {
        for (k, d) in devices.iter().enumerate() {
            match &d.failed {
                None => {}
                Some(Ok(step)) => {
                    return Err(Error::Divergence {
                        round: l,
                        edge_round: r,
                        step: *step,
                        device: k,
                    })
                }
                Some(Err(e)) => return Err(Error::config(format!("device {k}: {e}"))),
            }
        }
        Ok(())
    }

    fn aggregate(
        &self,
        op: AggregationOp,
        devices: &mut [Device],
        edges: &mut [ParamVec],
        weights: &AggregationWeights,
        gossip: Option<&DMatrix<f64>>,
    ) {
        let intra = |devices: &[Device], edges: &mut [ParamVec]| {
            for (i, members) in self.layout.clusters().iter().enumerate() {
                let xs: Vec<&ParamVec> = members.iter().map(|&k| &devices[k].x).collect();
                edges[i] = intra_aggregate(&xs, &weights.per_cluster[i]);
            }
        };
        match op {
            AggregationOp::None => return,
            AggregationOp::Intra => intra(devices, edges),
            AggregationOp::IntraGossip => {
                intra(devices, edges);
                let mixed = inter_aggregate(edges, gossip.expect("validated: ce_fedavg has a mixing matrix"));
                edges.clone_from_slice(&mixed);
            }
            AggregationOp::Global => {
                let xs: Vec<&ParamVec> = devices.iter().map(|d| &d.x).collect();
                let g = intra_aggregate(&xs, &weights.global);
                edges.iter_mut().for_each(|e| e.clone_from(&g));
            }
        }
        for (k, dev) in devices.iter_mut().enumerate() {
            dev.x.clone_from(&edges[self.layout.cluster_of(k)]);
            dev.v.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn evaluate(&self, l: usize, clock: f64, edges: &[ParamVec], devices: &[Device]) -> Result<(RoundRecord, ParamVec)> {
        let n = self.layout.n() as f64;
        let sizes = self.layout.sizes();
        let losses: Vec<Result<f64>> = par::map_range(edges.len(), |i| global_loss(self.model, &edges[i], self.train));
        let mut loss = 0.0;
        for (i, li) in losses.into_iter().enumerate() {
            loss += sizes[i] as f64 / n * li?;
        }
        let test_accuracy = match self.test {
            Some(test) if self.model.is_classifier() && !test.is_empty() => {
                let accs: Vec<Option<f64>> = par::map_range(edges.len(), |i| self.model.accuracy(&edges[i], test));
                Some(
                    accs.into_iter()
                        .enumerate()
                        .map(|(i, a)| sizes[i] as f64 / n * a.unwrap_or(0.0))
                        .sum(),
                )
            }
            _ => None,
        };
        let u = ParamVec::mean(devices.iter().map(|d| &d.x)).expect("at least one device");
        let grad_norm_sq = global_gradient(self.model, &u, self.train)?.norm_sq();
        let ybar = ParamVec::mean(edges).expect("at least one edge");
        let spread = edges.iter().map(|y| y.dist_sq(&ybar).sqrt()).fold(0.0, f64::max);
        let c = self.config;
        Ok((
            RoundRecord {
                round: l + 1,
                t: (l + 1) * c.period(),
                wall_sim_seconds: clock,
                global_loss: loss,
                test_accuracy,
                grad_norm_sq,
                spread,
            },
            u,
        ))
    }
}
