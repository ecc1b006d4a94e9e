//! Turns an [`ExperimentConfig`] into the inputs of one simulation.

use cfel_core::costmodel::SystemProfile;
use cfel_core::datagen::{
    load_idx_subset, make_classification, make_quadratic_fleet, partition, train_test_split, Dataset, DeviceDataset,
};
use cfel_core::engine::{ClusterLayout, RunConfig, Simulation};
use cfel_core::numerics::LossModel;
use cfel_core::topology::{build_graph, MixingMatrix};

use crate::config::{Assignment, DataSpec, ExperimentConfig, MixingWeights, ModelSpec};
use crate::error::{CliError, CliResult};

pub struct Experiment {
    pub run: RunConfig,
    pub layout: ClusterLayout,
    pub model: LossModel,
    pub train: Vec<DeviceDataset>,
    pub test: Option<Dataset>,
    pub mixing: MixingMatrix,
    pub profile: Option<SystemProfile>,
}

impl Experiment {
    pub fn simulation(&self) -> Simulation<'_> {
        let mut sim = Simulation::new(&self.run, &self.layout, &self.model, &self.train).with_mixing(&self.mixing);
        if let Some(t) = &self.test {
            sim = sim.with_test(t);
        }
        if let Some(p) = &self.profile {
            sim = sim.with_profile(p);
        }
        sim
    }
}

fn split(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    layout: &ClusterLayout,
    test_fraction: f64,
    seed: u64,
) -> CliResult<(Vec<DeviceDataset>, Option<Dataset>)> {
    let spec = cfg
        .partition
        .as_ref()
        .ok_or_else(|| CliError::Config("labeled data needs a [partition] section".into()))?;
    let parts = partition(ds, layout, spec, seed)?;
    if test_fraction == 0.0 {
        return Ok((parts, None));
    }
    let mut train = Vec::with_capacity(parts.len());
    let mut test = Vec::with_capacity(parts.len());
    for p in &parts {
        let (tr, te) = train_test_split(p, test_fraction, seed)?;
        train.push(tr);
        test.push(te);
    }
    Ok((train, Dataset::concat(&test).filter(|t| !t.is_empty())))
}

/// Builds data, layout, model and topology for one seed. The seed drives the
/// partition, the train/test split and the run's random streams; the data
/// itself comes from the data section's own seed.
pub fn build(cfg: &ExperimentConfig, seed: u64) -> CliResult<Experiment> {
    cfg.validate()?;
    let t = &cfg.topology;
    let layout = match t.assignment {
        Assignment::Contiguous => ClusterLayout::contiguous(t.devices, t.servers)?,
        Assignment::Random => ClusterLayout::random_balanced(t.devices, t.servers, t.seed)?,
    };
    let graph = build_graph(t.graph, t.servers, t.seed)?;
    let mixing = match t.weights {
        MixingWeights::Metropolis => MixingMatrix::metropolis(&graph)?,
        MixingWeights::MaxDegree => MixingMatrix::max_degree(&graph)?,
    };
    let (model, train, test) = match &cfg.data {
        DataSpec::Quadratic {
            dim,
            spread,
            samples_per_device,
            sample_spread,
            seed: data_seed,
        } => {
            let fleet = make_quadratic_fleet(t.devices, *dim, *spread, *data_seed)?;
            let train = fleet.device_datasets(*samples_per_device, *sample_spread, *data_seed)?;
            (LossModel::quadratic(*dim), train, None)
        }
        DataSpec::Classification {
            samples,
            features,
            classes,
            separation,
            seed: data_seed,
            test_fraction,
        } => {
            let ds = make_classification(*samples, *features, *classes, *separation, *data_seed)?;
            let (train, test) = split(cfg, &ds, &layout, *test_fraction, seed)?;
            (classifier(&cfg.model, *features, *classes), train, test)
        }
        DataSpec::Idx {
            images,
            labels,
            max_samples,
            test_fraction,
        } => {
            let ds = load_idx_subset(images, labels, *max_samples)?;
            let (train, test) = split(cfg, &ds, &layout, *test_fraction, seed)?;
            (classifier(&cfg.model, ds.dim(), ds.classes()), train, test)
        }
    };
    let profile = cfg.system.as_ref().map(|s| s.profile(t.devices)).transpose()?;
    let mut run = cfg.run.clone();
    run.seed = seed;
    Ok(Experiment {
        run,
        layout,
        model,
        train,
        test,
        mixing,
        profile,
    })
}

fn classifier(spec: &ModelSpec, features: usize, classes: usize) -> LossModel {
    match spec {
        ModelSpec::Logistic => LossModel::Logistic { features, classes },
        ModelSpec::Mlp { hidden } => LossModel::Mlp {
            features,
            hidden: *hidden,
            classes,
        },
        ModelSpec::Quadratic => unreachable!("validated: quadratic model needs quadratic data"),
    }
}
