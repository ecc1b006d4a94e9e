use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cfel_cli::presets::Preset;
use cfel_cli::ExperimentConfig;

fn cfel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfel")).args(args).output().expect("spawn cfel")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quadratic_toml(lr: f64) -> String {
    Preset::DeskQuadratic.toml().replace("lr = 0.05", &format!("lr = {lr}"))
}

#[test]
fn every_preset_parses_and_validates() {
    for p in [Preset::FemnistPaper, Preset::CifarPaper, Preset::DeskQuadratic, Preset::DeskLogistic] {
        let cfg = p.config().unwrap();
        cfg.validate().unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}

#[test]
fn femnist_preset_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfel(&["run", "--preset", "femnist-paper", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.toml", "summary.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let seed = dir.path().join("seed-0");
    for f in ["metrics.csv", "metrics.jsonl", "divergence.json", "bound.json", "partition.json", "checkpoint.bin"] {
        assert!(seed.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(seed.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "round,t,wall_sim_seconds,global_loss,test_accuracy,grad_norm_sq,spread");
    assert_eq!(rows.len(), 1 + 5);
    // Simulated time grows by one round per row.
    let times: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    for (i, t) in times.iter().enumerate() {
        assert!((t - times[0] * (i + 1) as f64).abs() <= 1e-9 * t, "{times:?}");
    }
    let bound: serde_json::Value = serde_json::from_str(&fs::read_to_string(seed.join("bound.json")).unwrap()).unwrap();
    assert!(bound["breakdown"]["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn metrics_have_one_row_per_round_plus_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfel(&["run", "--preset", "desk-quadratic", "--seeds", "3,4", "--out", path(dir.path())]);
    assert!(out.status.success());
    for s in [3, 4] {
        let csv = fs::read_to_string(dir.path().join(format!("seed-{s}/metrics.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 50);
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(cfel(&["run", "--preset", "desk-quadratic", "--out", path(d.path())]).status.success());
    }
    for f in ["metrics.csv", "metrics.jsonl", "divergence.json", "bound.json", "checkpoint.bin"] {
        assert_eq!(
            fs::read(a.path().join("seed-0").join(f)).unwrap(),
            fs::read(b.path().join("seed-0").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn missing_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, quadratic_toml(0.05).replace("rounds = 50\n", "")).unwrap();
    let out = cfel(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rounds"));
}

#[test]
fn unknown_key_and_bad_values_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, quadratic_toml(0.05).replace("tau = 2", "tau = 2\ntua = 3")).unwrap();
    assert_eq!(cfel(&["run", "--config", path(&cfg)]).status.code(), Some(2));
    fs::write(&cfg, quadratic_toml(0.05).replace("tau = 2", "tau = 0")).unwrap();
    assert_eq!(cfel(&["run", "--config", path(&cfg)]).status.code(), Some(2));
    fs::write(&cfg, quadratic_toml(0.05).replace("servers = 4", "servers = 17")).unwrap();
    assert_eq!(cfel(&["run", "--config", path(&cfg)]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cfel(&["run"]).status.code(), Some(2));
    assert_eq!(cfel(&["run", "--preset", "desk-quadratic", "--config", "x.toml"]).status.code(), Some(2));
    assert_eq!(cfel(&["bogus"]).status.code(), Some(2));
}

#[test]
fn large_step_size_exits_with_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, quadratic_toml(10.0)).unwrap();
    let out = cfel(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("round") && err.contains("device"), "{err}");
}

#[test]
fn verify_passes_by_default() {
    let out = cfel(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 4);
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn verify_accepts_a_valid_mixing_file_and_rejects_a_tampered_one() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    fs::write(&good, "0.5 0.25 0.25\n0.25 0.5 0.25\n0.25 0.25 0.5\n").unwrap();
    assert!(cfel(&["verify", "--mixing", path(&good)]).status.success());

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0.5 0.25 0.25\n0.25 0.5 0.25\n0.25 0.25 0.6\n").unwrap();
    let out = cfel(&["verify", "--mixing", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn sweep_writes_one_cell_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfel(&[
        "sweep", "--preset", "desk-quadratic", "--axis", "tau_fixed_qtau", "--values", "1,2,4", "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    for cell in ["tau-1", "tau-2", "tau-4"] {
        assert!(dir.path().join(cell).join("seed-0/metrics.csv").is_file(), "{cell}");
    }
    let bad = cfel(&["sweep", "--preset", "desk-quadratic", "--axis", "tau_fixed_qtau", "--values", "3"]);
    assert_eq!(bad.status.code(), Some(2));
}
