//! One-axis sweeps over an experiment configuration.

use std::fs;
use std::path::Path;

use cfel_core::datagen::PartitionSpec;
use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::run::{run_seed, write_config, SeedOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// τ over the given values with `qτ` held at the base config's value.
    #[value(name = "tau_fixed_qtau")]
    TauFixedQtau,
    /// Number of edge servers.
    #[value(name = "m")]
    M,
    /// Partition scheme: `cluster_iid`, `cluster_noniid`, `iid` or
    /// `dirichlet`.
    #[value(name = "partition")]
    Partition,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            SweepAxis::TauFixedQtau => &["2", "4", "8"],
            SweepAxis::M => &["4", "8", "16"],
            SweepAxis::Partition => &["cluster_iid", "cluster_noniid"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub cell: String,
    pub seeds: usize,
    pub mean_final_loss: f64,
    /// Standard error of the mean over seeds.
    pub se_final_loss: f64,
    pub mean_final_accuracy: Option<f64>,
}

fn parse_usize(axis: &str, v: &str) -> CliResult<usize> {
    v.parse()
        .map_err(|_| CliError::Config(format!("sweep value `{v}` for {axis} is not a positive integer")))
}

/// The configuration of one sweep cell.
pub fn cell_config(base: &ExperimentConfig, axis: SweepAxis, value: &str) -> CliResult<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::TauFixedQtau => {
            let tau = parse_usize("tau", value)?;
            let period = base.run.tau * base.run.q;
            if tau == 0 || !period.is_multiple_of(tau) {
                return Err(CliError::Config(format!("tau = {tau} does not divide qτ = {period}")));
            }
            cfg.run.tau = tau;
            cfg.run.q = period / tau;
        }
        SweepAxis::M => {
            cfg.topology.servers = parse_usize("m", value)?;
        }
        SweepAxis::Partition => {
            cfg.partition = Some(match value {
                "cluster_iid" => PartitionSpec::cluster_iid_preset(),
                "cluster_noniid" => PartitionSpec::cluster_noniid_preset(),
                "iid" => PartitionSpec::Iid,
                "dirichlet" => PartitionSpec::dirichlet_preset(),
                other => return Err(CliError::Config(format!("unknown partition `{other}`"))),
            });
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(cell: String, outcomes: &[SeedOutcome]) -> CellSummary {
    let k = outcomes.len() as f64;
    let losses: Vec<f64> = outcomes.iter().map(|o| o.final_record().global_loss).collect();
    let mean = losses.iter().sum::<f64>() / k;
    let se = if outcomes.len() > 1 {
        (losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
    } else {
        0.0
    };
    let accs: Option<Vec<f64>> = outcomes.iter().map(|o| o.final_record().test_accuracy).collect();
    CellSummary {
        cell,
        seeds: outcomes.len(),
        mean_final_loss: mean,
        se_final_loss: se,
        mean_final_accuracy: accs.map(|a| a.iter().sum::<f64>() / k),
    }
}

/// Runs every cell for every seed into `out/<axis>-<value>/seed-<s>/` and
/// writes `out/summary.csv`. Cells run concurrently when `parallel` is set.
pub fn cmd_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    parallel: bool,
    out: &Path,
) -> CliResult<Vec<CellSummary>> {
    let prefix = match axis {
        SweepAxis::TauFixedQtau => "tau",
        SweepAxis::M => "m",
        SweepAxis::Partition => "partition",
    };
    let cells: Vec<(String, ExperimentConfig)> = values
        .iter()
        .map(|v| Ok((format!("{prefix}-{v}"), cell_config(base, axis, v)?)))
        .collect::<CliResult<_>>()?;
    fs::create_dir_all(out)?;
    write_config(base, out)?;
    let run_cell = |(name, cfg): &(String, ExperimentConfig)| -> CliResult<CellSummary> {
        let dir = out.join(name);
        let outcomes = cfg
            .seeds
            .iter()
            .map(|&s| run_seed(cfg, s, &dir.join(format!("seed-{s}"))))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(summarize(name.clone(), &outcomes))
    };
    let summaries: Vec<CellSummary> = if parallel {
        cells.par_iter().map(run_cell).collect::<CliResult<_>>()?
    } else {
        cells.iter().map(run_cell).collect::<CliResult<_>>()?
    };
    let mut w = csv::Writer::from_path(out.join("summary.csv")).map_err(cfel_core::Error::from)?;
    for s in &summaries {
        w.serialize(s).map_err(cfel_core::Error::from)?;
        println!(
            "{}: mean final loss {:.6} ± {:.6} over {} seeds",
            s.cell, s.mean_final_loss, s.se_final_loss, s.seeds
        );
    }
    w.flush()?;
    Ok(summaries)
}
