//! Splitting one labeled dataset across the devices of a cluster layout.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{Dataset, DeviceDataset};
use crate::engine::ClusterLayout;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

const DIRICHLET_ATTEMPTS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    /// Uniformly shuffled, near-equal split.
    Iid,
    /// Per-device class proportions drawn from `Dir(alpha)`.
    Dirichlet { alpha: f64 },
    /// Stratified IID split across clusters, then label-sorted shards dealt to
    /// devices inside each cluster.
    ClusterIidShards { shards_per_device: usize },
    /// Label-sorted shards dealt to clusters, then label-sorted shards dealt to
    /// devices inside each cluster.
    ClusterNoniidShards {
        shards_per_cluster: usize,
        shards_per_device: usize,
    },
}

impl PartitionSpec {
    /// 16 shards per 8-device cluster, two per device.
    pub fn cluster_iid_preset() -> Self {
        PartitionSpec::ClusterIidShards { shards_per_device: 2 }
    }

    /// Five label-sorted shards per cluster, two per device.
    pub fn cluster_noniid_preset() -> Self {
        PartitionSpec::ClusterNoniidShards {
            shards_per_cluster: 5,
            shards_per_device: 2,
        }
    }

    pub fn dirichlet_preset() -> Self {
        PartitionSpec::Dirichlet { alpha: 0.5 }
    }
}

/// Device id → source row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub devices: BTreeMap<usize, Vec<usize>>,
}

impl PartitionManifest {
    pub fn from_devices(devices: &[DeviceDataset]) -> Self {
        PartitionManifest {
            devices: devices
                .iter()
                .map(|d| (d.device_id, d.source_indices.clone()))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Deterministic partition of `dataset` over the devices of `layout`.
pub fn partition(
    dataset: &Dataset,
    layout: &ClusterLayout,
    spec: &PartitionSpec,
    seed: u64,
) -> Result<Vec<DeviceDataset>> {
    let n = layout.n();
    if dataset.len() < n {
        return Err(Error::config(format!(
            "{} samples cannot cover {n} devices",
            dataset.len()
        )));
    }
    let assignment = match spec {
        PartitionSpec::Iid => iid(dataset.len(), n, seed),
        PartitionSpec::Dirichlet { alpha } => dirichlet(dataset, n, *alpha, seed)?,
        PartitionSpec::ClusterIidShards { shards_per_device } => {
            if *shards_per_device == 0 {
                return Err(Error::config("shards_per_device must be positive"));
            }
            let per_cluster = stratified_clusters(dataset, layout, seed);
            shard_within_clusters(dataset, layout, per_cluster, *shards_per_device, seed)?
        }
        PartitionSpec::ClusterNoniidShards {
            shards_per_cluster,
            shards_per_device,
        } => {
            if *shards_per_cluster == 0 || *shards_per_device == 0 {
                return Err(Error::config("shard counts must be positive"));
            }
            let per_cluster = sharded_clusters(dataset, layout.m(), *shards_per_cluster, seed)?;
            shard_within_clusters(dataset, layout, per_cluster, *shards_per_device, seed)?
        }
    };
    Ok(assignment
        .into_iter()
        .enumerate()
        .map(|(k, mut idx)| {
            idx.sort_unstable();
            DeviceDataset {
                device_id: k,
                data: dataset.subset(&idx),
                source_indices: idx,
            }
        })
        .collect())
}

fn shuffled(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..len).collect();
    v.shuffle(rng);
    v
}

/// Splits `items` into `parts` contiguous chunks whose sizes differ by at most
/// one, larger chunks first.
fn even_chunks<T: Clone>(items: &[T], parts: usize) -> Vec<Vec<T>> {
    let (base, extra) = (items.len() / parts, items.len() % parts);
    let mut out = Vec::with_capacity(parts);
    let mut at = 0;
    for p in 0..parts {
        let size = base + usize::from(p < extra);
        out.push(items[at..at + size].to_vec());
        at += size;
    }
    out
}

/// Integer counts summing to `total`, proportional to `weights`
/// (largest-remainder rounding; ties go to the lower index).
pub(crate) fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn iid(len: usize, n: usize, seed: u64) -> Vec<Vec<usize>> {
    let order = shuffled(len, &mut rng::stream(seed, Domain::Partition, 0, 0));
    even_chunks(&order, n)
}

fn indices_by_class(dataset: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); dataset.classes()];
    for i in 0..dataset.len() {
        by_class[dataset.label(i)].push(i);
    }
    by_class
}

fn dirichlet(dataset: &Dataset, n: usize, alpha: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("dirichlet alpha must be positive, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config(e.to_string()))?;
    let classes = dataset.classes();
    for attempt in 0..DIRICHLET_ATTEMPTS {
        let mut r = rng::stream(seed, Domain::Partition, 1, attempt);
        // proportions[k][c]
        let proportions: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let g: Vec<f64> = (0..classes).map(|_| gamma.sample(&mut r)).collect();
                let s: f64 = g.iter().sum();
                if s > 0.0 {
                    g.iter().map(|v| v / s).collect()
                } else {
                    vec![1.0 / classes as f64; classes]
                }
            })
            .collect();
        let mut devices = vec![Vec::new(); n];
        for (c, members) in indices_by_class(dataset).into_iter().enumerate() {
            let mut members = members;
            members.shuffle(&mut r);
            let weights: Vec<f64> = proportions.iter().map(|p| p[c]).collect();
            let counts = largest_remainder(members.len(), &weights);
            let mut at = 0;
            for (k, cnt) in counts.into_iter().enumerate() {
                devices[k].extend_from_slice(&members[at..at + cnt]);
                at += cnt;
            }
        }
        if devices.iter().all(|d| !d.is_empty()) {
            return Ok(devices);
        }
    }
    Err(Error::config(format!(
        "dirichlet(alpha = {alpha}) left a device empty in {DIRICHLET_ATTEMPTS} draws"
    )))
}

/// Per-class shuffled, proportional split of the samples over clusters.
fn stratified_clusters(dataset: &Dataset, layout: &ClusterLayout, seed: u64) -> Vec<Vec<usize>> {
    let sizes: Vec<f64> = layout.sizes().iter().map(|&s| s as f64).collect();
    let mut clusters = vec![Vec::new(); layout.m()];
    for (c, mut members) in indices_by_class(dataset).into_iter().enumerate() {
        members.shuffle(&mut rng::stream(seed, Domain::Partition, 2, c as u64));
        let counts = largest_remainder(members.len(), &sizes);
        let mut at = 0;
        for (i, cnt) in counts.into_iter().enumerate() {
            clusters[i].extend_from_slice(&members[at..at + cnt]);
            at += cnt;
        }
    }
    clusters
}

fn sorted_by_label(dataset: &Dataset, mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_by_key(|&i| (dataset.label(i), i));
    idx
}

/// Label-sorted shards dealt `shards_per_cluster` at a time to clusters.
fn sharded_clusters(
    dataset: &Dataset,
    m: usize,
    shards_per_cluster: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let total = m * shards_per_cluster;
    if dataset.len() < total {
        return Err(Error::config(format!(
            "{} samples cannot form {total} cluster shards",
            dataset.len()
        )));
    }
    let sorted = sorted_by_label(dataset, (0..dataset.len()).collect());
    let shards = even_chunks(&sorted, total);
    let order = shuffled(total, &mut rng::stream(seed, Domain::Partition, 3, 0));
    Ok((0..m)
        .map(|i| {
            order[i * shards_per_cluster..(i + 1) * shards_per_cluster]
                .iter()
                .flat_map(|&s| shards[s].iter().copied())
                .collect()
        })
        .collect())
}

fn shard_within_clusters(
    dataset: &Dataset,
    layout: &ClusterLayout,
    per_cluster: Vec<Vec<usize>>,
    shards_per_device: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let mut devices = vec![Vec::new(); layout.n()];
    for (i, idx) in per_cluster.into_iter().enumerate() {
        let members = layout.members(i);
        let total = members.len() * shards_per_device;
        if idx.len() < total {
            return Err(Error::config(format!(
                "cluster {i} holds {} samples, fewer than its {total} device shards",
                idx.len()
            )));
        }
        let shards = even_chunks(&sorted_by_label(dataset, idx), total);
        let order = shuffled(total, &mut rng::stream(seed, Domain::Partition, 4, i as u64));
        for (j, &k) in members.iter().enumerate() {
            for &s in &order[j * shards_per_device..(j + 1) * shards_per_device] {
                devices[k].extend_from_slice(&shards[s]);
            }
        }
    }
    Ok(devices)
}

/// Per-device train/test split; at least one sample always stays in train.
pub fn train_test_split(
    device: &DeviceDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(DeviceDataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::config(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let len = device.len();
    let n_test = ((len as f64 * test_fraction).round() as usize).min(len.saturating_sub(1));
    let order = shuffled(
        len,
        &mut rng::stream(seed, Domain::Partition, 5, device.device_id as u64),
    );
    let mut train_idx = order[n_test..].to_vec();
    let mut test_idx = order[..n_test].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let source = |idx: &[usize]| -> Vec<usize> {
        if device.source_indices.is_empty() {
            Vec::new()
        } else {
            idx.iter().map(|&i| device.source_indices[i]).collect()
        }
    };
    Ok((
        DeviceDataset {
            device_id: device.device_id,
            data: device.data.subset(&train_idx),
            source_indices: source(&train_idx),
        },
        device.data.subset(&test_idx),
    ))
}
