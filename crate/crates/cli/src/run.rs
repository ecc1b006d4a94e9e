//! Single runs and the artifacts they leave behind.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use cfel_core::analysis::{
    estimate_divergences, estimate_f_inf, estimate_sigma_sq, estimate_smoothness, probe_points, theorem1_bound,
    BoundBreakdown, BoundInputs, DivergenceReport,
};
use cfel_core::datagen::PartitionManifest;
use cfel_core::engine::{global_loss, Algorithm, RoundRecord, RunOutput};
use cfel_core::io::{write_checkpoint, write_records_csv, write_records_jsonl};
use cfel_core::numerics::ParamVec;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::setup::{build, Experiment};

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub algorithm: &'static str,
    pub inputs: BoundInputs,
    /// Present for CE-FedAvg only.
    pub breakdown: Option<BoundBreakdown>,
    /// Mean of the per-round `‖∇F(u)‖²` samples.
    pub measured_grad_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

impl SeedOutcome {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("at least one round")
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn analyse(exp: &Experiment, out: &RunOutput, cfg: &ExperimentConfig) -> CliResult<(DivergenceReport, BoundReport)> {
    let probes = probe_points(out, cfg.analysis.probes);
    let report = estimate_divergences(&exp.model, &exp.train, &exp.layout, &probes)?;
    let l = estimate_smoothness(&exp.model, &exp.train, &probes)?;
    let last = out.round_averages.last().unwrap_or(&out.initial);
    let sigma_sq = estimate_sigma_sq(
        &exp.model,
        last,
        &exp.train,
        exp.run.batch_size,
        cfg.analysis.sigma_trials,
        exp.run.seed,
    )? + exp.run.noise_sigma_sq;
    let f_inf = estimate_f_inf(&exp.model, &exp.train, &out.initial, 1.0 / l, cfg.analysis.f_inf_steps)?;
    let f_gap = (global_loss(&exp.model, &out.initial, &exp.train)? - f_inf).max(0.0);
    let inputs = BoundInputs {
        l,
        sigma_sq,
        eps_sq: report.eps_sq,
        eps_i_sq: report.eps_i_sq.clone(),
        cluster_sizes: exp.layout.sizes(),
        zeta: exp.mixing.zeta(),
        pi: exp.run.pi,
        tau: exp.run.tau,
        q: exp.run.q,
        lr: exp.run.lr,
        t_total: exp.run.total_iterations(),
        f_gap,
    };
    let breakdown = match exp.run.algorithm {
        Algorithm::CeFedavg => Some(theorem1_bound(&inputs)?),
        _ => None,
    };
    let measured = out.records.iter().map(|r| r.grad_norm_sq).sum::<f64>() / out.records.len() as f64;
    Ok((
        report,
        BoundReport {
            algorithm: exp.run.algorithm.name(),
            inputs,
            breakdown,
            measured_grad_norm_sq: measured,
        },
    ))
}

/// Runs one seed and writes `metrics.csv`, `metrics.jsonl`, `divergence.json`,
/// `bound.json`, `partition.json` and `checkpoint.bin` into `dir`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> CliResult<SeedOutcome> {
    let exp = build(cfg, seed)?;
    let out = exp.simulation().run()?;
    fs::create_dir_all(dir)?;
    write_records_csv(BufWriter::new(File::create(dir.join("metrics.csv"))?), &out.records)?;
    write_records_jsonl(BufWriter::new(File::create(dir.join("metrics.jsonl"))?), &out.records)?;
    let (divergence, bound) = analyse(&exp, &out, cfg)?;
    write_json(&dir.join("divergence.json"), &divergence)?;
    write_json(&dir.join("bound.json"), &bound)?;
    write_json(&dir.join("partition.json"), &PartitionManifest::from_devices(&exp.train))?;
    let u = ParamVec::mean(&out.device_params).expect("at least one device");
    write_checkpoint(BufWriter::new(File::create(dir.join("checkpoint.bin"))?), &u)?;
    Ok(SeedOutcome {
        seed,
        records: out.records,
    })
}

/// Runs every seed into `out/seed-<s>/` and writes `out/summary.csv`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> CliResult<Vec<SeedOutcome>> {
    fs::create_dir_all(out)?;
    write_config(cfg, out)?;
    let mut outcomes = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let o = run_seed(cfg, seed, &out.join(format!("seed-{seed}")))?;
        let f = o.final_record();
        println!(
            "seed {seed}: {} rounds, final loss {:.6}, grad norm² {:.3e}, simulated {:.2} s",
            f.round, f.global_loss, f.grad_norm_sq, f.wall_sim_seconds
        );
        outcomes.push(o);
    }
    let mut w = csv::Writer::from_path(out.join("summary.csv")).map_err(cfel_core::Error::from)?;
    w.write_record(["seed", "final_loss", "final_accuracy", "final_grad_norm_sq", "wall_sim_seconds"])
        .map_err(cfel_core::Error::from)?;
    for o in &outcomes {
        let f = o.final_record();
        w.write_record([
            o.seed.to_string(),
            f.global_loss.to_string(),
            f.test_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            f.grad_norm_sq.to_string(),
            f.wall_sim_seconds.to_string(),
        ])
        .map_err(cfel_core::Error::from)?;
    }
    w.flush()?;
    Ok(outcomes)
}

/// Saves the resolved configuration next to its results.
pub fn write_config(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}
