//! Equivalence harnesses: CE-FedAvg against the algorithms it reduces to and
//! against its matrix form.

use std::path::Path;

use cfel_core::datagen::{make_quadratic_fleet, DeviceDataset};
use cfel_core::engine::oracle::{average_step_residual, column};
use cfel_core::engine::reference::{decentralized_local_sgd, hierarchical_sgd};
use cfel_core::engine::{
    run_matrix_oracle, AggregationOp, Algorithm, ClusterLayout, RunConfig, Simulation, TrajectoryRecorder,
};
use cfel_core::numerics::{LossModel, ParamVec};
use cfel_core::rng::{self, Domain};
use cfel_core::topology::{build_graph, GraphKind, MixingMatrix};
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: max deviation {:.3e} (tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_deviation,
            self.tolerance
        )
    }
}

fn max_dev(a: &[ParamVec], b: &[ParamVec]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn fleet(n: usize, d: usize, seed: u64) -> CliResult<Vec<DeviceDataset>> {
    Ok(make_quadratic_fleet(n, d, 1.0, seed)?.device_datasets(5, 0.5, seed)?)
}

fn small_config(alg: Algorithm, tau: usize, q: usize, pi: usize, rounds: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(alg, tau, q, pi, 0.05, rounds);
    c.batch_size = 2;
    c.noise_sigma_sq = 0.1;
    c.seed = seed;
    c
}

/// CE-FedAvg with one server and one edge round per global round against
/// FedAvg. Any difference at all fails.
pub fn check_fedavg_reduction(seeds: &[u64]) -> CliResult<CheckResult> {
    let mut worst = 0.0_f64;
    for &seed in seeds {
        let (n, d) = (8, 10);
        let data = fleet(n, d, seed)?;
        let layout = ClusterLayout::contiguous(n, 1)?;
        let model = LossModel::quadratic(d);
        let h = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 1, seed)?)?;
        let ce = small_config(Algorithm::CeFedavg, 4, 1, 10, 16, seed);
        let fa = RunConfig {
            algorithm: Algorithm::Fedavg,
            ..ce.clone()
        };
        let a = Simulation::new(&ce, &layout, &model, &data).with_mixing(&h).run()?;
        let b = Simulation::new(&fa, &layout, &model, &data).run()?;
        let bitwise = a.device_params == b.device_params && a.records == b.records;
        worst = worst.max(if bitwise { 0.0 } else { max_dev(&a.device_params, &b.device_params).max(f64::MIN_POSITIVE) });
    }
    Ok(CheckResult {
        name: "fedavg-reduction",
        max_deviation: worst,
        tolerance: 0.0,
    })
}

/// One device per server with `τ = 1` against directly coded decentralized
/// local SGD.
pub fn check_decentralized_reduction(seeds: &[u64]) -> CliResult<CheckResult> {
    let mut worst = 0.0_f64;
    for &seed in seeds {
        let (n, d) = (8, 10);
        let data = fleet(n, d, seed)?;
        let layout = ClusterLayout::contiguous(n, n)?;
        let model = LossModel::quadratic(d);
        let h = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, n, seed)?)?;
        let c = small_config(Algorithm::CeFedavg, 1, 4, 2, 16, seed);
        let engine = Simulation::new(&c, &layout, &model, &data).with_mixing(&h).run()?;
        let direct = decentralized_local_sgd(&model, &data, h.entries(), &c, &engine.initial)?;
        worst = worst.max(max_dev(&engine.device_params, &direct));
    }
    Ok(CheckResult {
        name: "decentralized-local-sgd-reduction",
        max_deviation: worst,
        tolerance: 1e-12,
    })
}

/// A complete backhaul graph against directly coded hierarchical SGD.
pub fn check_hsgd_reduction(seeds: &[u64]) -> CliResult<CheckResult> {
    let mut worst = 0.0_f64;
    for &seed in seeds {
        let (n, m, d) = (8, 4, 10);
        let data = fleet(n, d, seed)?;
        let layout = ClusterLayout::contiguous(n, m)?;
        let model = LossModel::quadratic(d);
        let h = MixingMatrix::metropolis(&build_graph(GraphKind::Complete, m, seed)?)?;
        let c = small_config(Algorithm::CeFedavg, 2, 4, 1, 8, seed);
        let engine = Simulation::new(&c, &layout, &model, &data).with_mixing(&h).run()?;
        let direct = hierarchical_sgd(&model, &data, &layout, &c, &engine.initial)?;
        worst = worst.max(max_dev(&engine.device_params, &direct));
    }
    Ok(CheckResult {
        name: "hsgd-reduction",
        max_deviation: worst,
        tolerance: 1e-12,
    })
}

/// Per-configuration results of the matrix-oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub oracle: CheckResult,
    /// Largest per-step residual of the averaged-model recursion.
    pub recursion: CheckResult,
    /// Largest change of the device average across an aggregation.
    pub conservation: CheckResult,
}

/// Random small configurations with equal cluster sizes. `mixing`, when
/// given, replaces the generated topology (and fixes `m`).
pub fn check_matrix_oracle(configs: usize, seed: u64, mixing: Option<&MixingMatrix>) -> CliResult<OracleReport> {
    let mut r = rng::stream(seed, Domain::Probe, 0xACC, 0);
    let (mut oracle, mut recursion, mut conservation) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..configs {
        let m = mixing.map_or_else(|| r.random_range(1..=4usize), |h| h.m());
        let per = r.random_range(1..=3usize);
        let n = m * per;
        let d = r.random_range(2..=6usize);
        let tau = r.random_range(1..=3usize);
        let q = r.random_range(1..=3usize);
        let pi = r.random_range(1..=4usize);
        let rounds = r.random_range(1..=3usize);
        let data = fleet(n, d, seed + i as u64)?;
        let layout = ClusterLayout::contiguous(n, m)?;
        let model = LossModel::quadratic(d);
        let generated;
        let h = match mixing {
            Some(h) => h,
            None => {
                let kind = if i % 2 == 0 { GraphKind::Ring } else { GraphKind::Complete };
                generated = MixingMatrix::metropolis(&build_graph(kind, m, seed)?)?;
                &generated
            }
        };
        let c = small_config(Algorithm::CeFedavg, tau, q, pi, rounds, seed + i as u64);
        let sim = Simulation::new(&c, &layout, &model, &data).with_mixing(h);
        let mut rec = TrajectoryRecorder::default();
        sim.run_observed(&mut rec)?;
        let xs = run_matrix_oracle(&sim)?;
        for (x, states) in xs.iter().zip(&rec.states) {
            let cols: Vec<ParamVec> = (0..n).map(|k| column(x, k)).collect();
            oracle = oracle.max(max_dev(&cols, states));
        }
        for t in 0..rec.grads.len() {
            recursion = recursion.max(average_step_residual(&rec.states[t], &rec.states[t + 1], &rec.grads[t], c.lr));
            if rec.ops[t] != AggregationOp::None {
                let before = ParamVec::mean(&rec.before[t]).expect("devices");
                let after = ParamVec::mean(&rec.states[t + 1]).expect("devices");
                conservation = conservation.max(max_dev(&[before], &[after]));
            }
        }
    }
    Ok(OracleReport {
        oracle: CheckResult {
            name: "matrix-oracle",
            max_deviation: oracle,
            tolerance: 1e-10,
        },
        recursion: CheckResult {
            name: "averaged-model-recursion",
            max_deviation: recursion,
            tolerance: 1e-12,
        },
        conservation: CheckResult {
            name: "aggregation-conserves-average",
            max_deviation: conservation,
            tolerance: 1e-10,
        },
    })
}

/// Reads a whitespace-separated square matrix, one row per line, and checks it
/// is a valid mixing matrix.
pub fn load_mixing(path: &Path) -> CliResult<MixingMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| CliError::Config(format!("bad matrix entry `{v}`"))))
                .collect()
        })
        .collect::<CliResult<_>>()?;
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Config("mixing matrix must be square".into()));
    }
    let h = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    Ok(MixingMatrix::from_matrix(h, None)?)
}

/// Runs all checks and prints one line per check. Fails if any check fails.
pub fn cmd_verify(mixing: Option<&Path>) -> CliResult<Vec<CheckResult>> {
    let custom = match mixing {
        Some(p) => match load_mixing(p) {
            Ok(h) => Some(h),
            Err(e) => {
                println!("FAIL mixing-matrix: {e}");
                return Err(CliError::Verify(format!("{}: {e}", p.display())));
            }
        },
        None => None,
    };
    let seeds = [0, 1, 2];
    let oracle = check_matrix_oracle(5, 0, custom.as_ref())?;
    let results = vec![
        check_fedavg_reduction(&seeds)?,
        check_decentralized_reduction(&seeds)?,
        check_hsgd_reduction(&seeds)?,
        oracle.oracle,
        oracle.recursion,
        oracle.conservation,
    ];
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(results)
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}
