//! Runs every acceptance criterion and prints one PASS/FAIL line each. Exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cfel_cli::verify::{check_decentralized_reduction, check_fedavg_reduction, check_hsgd_reduction, check_matrix_oracle};
use cfel_core::analysis::{
    estimate_divergences, lr_cap, probe_points, theorem1_bound, BoundInputs, GradNormObserver,
};
use cfel_core::costmodel::{round_time, SystemProfile};
use cfel_core::datagen::{make_classification, make_quadratic_fleet, partition, PartitionSpec};
use cfel_core::engine::{Algorithm, ClusterLayout, RunConfig, Simulation};
use cfel_core::numerics::{LossModel, ParamVec};
use cfel_core::topology::{build_graph, BackhaulGraph, GraphKind, MixingMatrix};
use cfel_core::rng::{self, Domain};
use rand::Rng;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn criterion(
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    f: impl FnOnce() -> Result<String, String>,
) -> Outcome {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail.push_str(&format!("; over the {:.0?} budget", b));
        }
    }
    let o = Outcome {
        id,
        name,
        passed,
        detail,
        elapsed,
        budget,
    };
    println!(
        "{} [{:>2}] {}: {} ({:.2?}{})",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail,
        o.elapsed,
        o.budget.map(|b| format!(" of {:.0?}", b)).unwrap_or_default()
    );
    o
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn mixing_invariants() -> Result<String, String> {
    let e = |r: cfel_core::Result<BackhaulGraph>| r.map_err(|e| e.to_string());
    let mut graphs = vec![
        ("ring-8", e(build_graph(GraphKind::Ring, 8, 0))?),
        ("complete-8", e(build_graph(GraphKind::Complete, 8, 0))?),
        ("torus-2x4", e(build_graph(GraphKind::Torus, 8, 0))?),
    ];
    for seed in 0..20 {
        graphs.push(("erdos-renyi", e(build_graph(GraphKind::ErdosRenyi { edge_probability: 0.3 }, 10, seed))?));
    }
    let torus = &graphs[2].1;
    ensure(torus.degrees().iter().all(|&d| d == 3) && torus.edge_count() == 12, "torus 2x4 is not 3-regular with 12 edges")?;
    let mut worst_stochastic = 0.0_f64;
    let mut worst_zeta = 0.0_f64;
    for (name, g) in &graphs {
        let h = MixingMatrix::metropolis(g).map_err(|e| format!("{name}: {e}"))?;
        let w = h.entries();
        let m = g.m();
        for i in 0..m {
            worst_stochastic = worst_stochastic.max((w.row(i).sum() - 1.0).abs()).max((w.column(i).sum() - 1.0).abs());
            for j in 0..m {
                ensure(w[(i, j)] == w[(j, i)], format!("{name}: asymmetric at ({i},{j})"))?;
                ensure(w[(i, j)] >= 0.0, format!("{name}: negative entry at ({i},{j})"))?;
                if i != j {
                    ensure((w[(i, j)] != 0.0) == g.has_edge(i, j), format!("{name}: sparsity mismatch at ({i},{j})"))?;
                }
            }
        }
        worst_zeta = worst_zeta.max(h.zeta());
    }
    ensure(worst_stochastic <= 1e-12, format!("row/column sum error {worst_stochastic:.2e}"))?;
    ensure(worst_zeta < 1.0, format!("zeta {worst_zeta}"))?;
    Ok(format!(
        "{} graphs, max stochasticity error {worst_stochastic:.1e}, max zeta {worst_zeta:.4}",
        graphs.len()
    ))
}

fn spectral_values() -> Result<String, String> {
    let ring = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 8, 0).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let complete = MixingMatrix::metropolis(&build_graph(GraphKind::Complete, 8, 0).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    // Metropolis on the 8-ring is the circulant (1/3)(I + S + S^-1) with
    // eigenvalues (1 + 2cos(2πk/8))/3.
    let expect = (0..8)
        .map(|k| (1.0 + 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos()) / 3.0)
        .filter(|v| (v - 1.0).abs() > 1e-12)
        .map(f64::abs)
        .fold(0.0, f64::max);
    let closed = (1.0 + 2f64.sqrt()) / 3.0;
    ensure((expect - closed).abs() <= 1e-15, "circulant oracle disagrees with closed form")?;
    let ring_err = (ring.zeta() - closed).abs();
    ensure(ring_err <= 1e-9, format!("ring zeta {} vs {closed}", ring.zeta()))?;
    ensure(complete.zeta().abs() <= 1e-12, format!("complete zeta {}", complete.zeta()))?;
    Ok(format!("ring-8 error {ring_err:.1e}, complete zeta {:.1e}", complete.zeta()))
}

fn reductions() -> Result<String, String> {
    let seeds = [0, 1, 2];
    let checks = [
        check_fedavg_reduction(&seeds).map_err(|e| e.to_string())?,
        check_decentralized_reduction(&seeds).map_err(|e| e.to_string())?,
        check_hsgd_reduction(&seeds).map_err(|e| e.to_string())?,
    ];
    let summary = checks
        .iter()
        .map(|c| format!("{} {:.1e}", c.name, c.max_deviation))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(checks.iter().all(|c| c.passed()), summary.clone())?;
    Ok(summary)
}

fn oracle_and_conservation(conservation: &mut Option<Result<String, String>>) -> Result<String, String> {
    let r = check_matrix_oracle(5, 0, None).map_err(|e| e.to_string())?;
    let drift = format!("max average drift {:.1e} (tol 1e-10)", r.conservation.max_deviation);
    *conservation = Some(if r.conservation.passed() { Ok(drift) } else { Err(drift) });
    let text = format!(
        "5 configs, oracle deviation {:.1e} (tol 1e-10), recursion residual {:.1e} (tol 1e-12)",
        r.oracle.max_deviation, r.recursion.max_deviation
    );
    ensure(r.oracle.passed() && r.recursion.passed(), text.clone())?;
    Ok(text)
}

fn random_profile(r: &mut impl Rng) -> SystemProfile {
    let devices = r.random_range(1..10usize);
    SystemProfile {
        flops_per_iteration: r.random_range(1e5..1e9),
        device_flops: (0..devices).map(|_| r.random_range(1e8..1e12)).collect(),
        model_bits: r.random_range(1e4..1e8),
        b_d2e: r.random_range(1e5..1e8),
        b_e2e: r.random_range(1e5..1e8),
        b_d2c: r.random_range(1e5..1e8),
    }
}

fn cost_model() -> Result<String, String> {
    let p = SystemProfile::femnist_paper(64);
    // τq local steps at 665 MFLOP on 691.2 GFLOP/s devices, q uploads of a
    // 28,586,944-bit model at 10 Mbit/s, π gossip exchanges at 50 Mbit/s.
    let by_hand = 2.0 * 8.0 * 665.0e6 / 691.2e9 + 8.0 * 28_586_944.0 / 10.0e6 + 10.0 * 28_586_944.0 / 50.0e6;
    let got = round_time(Algorithm::CeFedavg, &p, 2, 8, 10).map_err(|e| e.to_string())?;
    let rel = (got - by_hand).abs() / by_hand;
    ensure(rel <= 1e-9, format!("round time {got} vs {by_hand}"))?;
    ensure((got - 28.602_337_518_5).abs() < 1e-9, format!("round time {got}"))?;

    let algs = [Algorithm::CeFedavg, Algorithm::Fedavg, Algorithm::HierFavg, Algorithm::LocalEdge];
    let mut r = rng::stream(6, Domain::Probe, 0xC057, 0);
    let rt = |alg, p: &SystemProfile, tau, q, pi| round_time(alg, p, tau, q, pi).map_err(|e| e.to_string());
    for case in 0..100 {
        let p = random_profile(&mut r);
        let (tau, q, pi) = (r.random_range(1..8usize), r.random_range(2..8usize), r.random_range(1..8usize));
        for alg in algs {
            let base = rt(alg, &p, tau, q, pi)?;
            ensure(rt(alg, &p, tau + 1, q, pi)? > base, format!("case {case}: {alg:?} not increasing in tau"))?;
            ensure(rt(alg, &p, tau, q + 1, pi)? > base, format!("case {case}: {alg:?} not increasing in q"))?;
            let mut heavy = p.clone();
            heavy.model_bits *= 1.5;
            ensure(rt(alg, &heavy, tau, q, pi)? > base, format!("case {case}: {alg:?} not increasing in model size"))?;
            let mut slow = p.clone();
            let k = (0..p.device_flops.len())
                .min_by(|&a, &b| p.device_flops[a].total_cmp(&p.device_flops[b]))
                .unwrap_or(0);
            slow.device_flops[k] *= 0.5;
            ensure(rt(alg, &slow, tau, q, pi)? > base, format!("case {case}: {alg:?} ignores the straggler"))?;
        }
        let ce = rt(Algorithm::CeFedavg, &p, tau, q, pi)?;
        ensure(rt(Algorithm::CeFedavg, &p, tau, q, pi + 1)? > ce, format!("case {case}: not increasing in pi"))?;
        let mut fast = p.clone();
        fast.b_e2e *= 2.0;
        ensure(rt(Algorithm::CeFedavg, &fast, tau, q, pi)? < ce, format!("case {case}: faster backhaul not cheaper"))?;
        fast = p.clone();
        fast.b_d2e *= 2.0;
        ensure(rt(Algorithm::CeFedavg, &fast, tau, q, pi)? < ce, format!("case {case}: faster uplink not cheaper"))?;
    }
    Ok(format!("femnist round {got:.10} s (rel error {rel:.1e}); 100 random profiles monotone"))
}

fn theorem_bound() -> Result<String, String> {
    let e = |x: cfel_core::Error| x.to_string();
    let (n, m, d) = (16, 4, 6);
    let fleet = make_quadratic_fleet(n, d, 1.0, 7).map_err(e)?;
    let data = fleet.device_datasets(1, 0.0, 7).map_err(e)?;
    let layout = ClusterLayout::contiguous(n, m).map_err(e)?;
    let model = LossModel::quadratic(d);
    // Gradients x − b_k make every divergence independent of x, so one probe
    // gives the exact constants.
    let div = estimate_divergences(&model, &data, &layout, &[ParamVec::zeros(d)]).map_err(e)?;
    let f_gap = 0.5 * fleet.minimizer.norm_sq();
    let sigma_sq = 0.5;
    let mut worst_ratio = 0.0_f64;
    let mut count = 0;
    for tau in [1, 2, 4] {
        for q in [2, 4] {
            for zeta in [0.2, 0.7] {
                if tau == 4 && zeta == 0.2 {
                    continue;
                }
                let h = MixingMatrix::lazy_complete(m, zeta).map_err(e)?;
                let lr = lr_cap(1.0, tau, q, zeta, 1).map_err(e)?;
                let mut c = RunConfig::new(Algorithm::CeFedavg, tau, q, 1, lr, 8);
                c.noise_sigma_sq = sigma_sq;
                let mut measured = 0.0;
                for seed in 0..5 {
                    c.seed = seed;
                    let mut obs = GradNormObserver::new(&model, &data);
                    Simulation::new(&c, &layout, &model, &data)
                        .with_mixing(&h)
                        .run_observed(&mut obs)
                        .map_err(e)?;
                    measured += obs.average() / 5.0;
                }
                let bound = theorem1_bound(&BoundInputs {
                    l: 1.0,
                    sigma_sq,
                    eps_sq: div.eps_sq,
                    eps_i_sq: div.eps_i_sq.clone(),
                    cluster_sizes: layout.sizes(),
                    zeta,
                    pi: 1,
                    tau,
                    q,
                    lr,
                    t_total: c.total_iterations(),
                    f_gap,
                })
                .map_err(e)?;
                ensure(bound.lr_ok, format!("tau={tau} q={q} zeta={zeta}: step size above the cap"))?;
                ensure(
                    measured <= bound.total,
                    format!("tau={tau} q={q} zeta={zeta}: measured {measured:.4e} > bound {:.4e}", bound.total),
                )?;
                worst_ratio = worst_ratio.max(measured / bound.total);
                count += 1;
            }
        }
    }
    ensure(count >= 8, "fewer than 8 configurations")?;
    Ok(format!("{count} configs x 5 seeds, max measured/bound {worst_ratio:.3}"))
}

fn decomposition() -> Result<String, String> {
    let e = |x: cfel_core::Error| x.to_string();
    let ds = make_classification(1280, 6, 10, 1.0, 3).map_err(e)?;
    let layout = ClusterLayout::contiguous(32, 4).map_err(e)?;
    let model = LossModel::Logistic { features: 6, classes: 10 };
    let specs = [
        PartitionSpec::Iid,
        PartitionSpec::Dirichlet { alpha: 0.5 },
        PartitionSpec::cluster_iid_preset(),
        PartitionSpec::cluster_noniid_preset(),
    ];
    let mut worst = 0.0_f64;
    let mut probes_seen = 0;
    for spec in &specs {
        let data = partition(&ds, &layout, spec, 3).map_err(|x| format!("{spec:?}: {x}"))?;
        let h = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 4, 0).map_err(e)?).map_err(e)?;
        let mut c = RunConfig::new(Algorithm::CeFedavg, 2, 2, 2, 0.1, 4);
        c.batch_size = 8;
        let run = Simulation::new(&c, &layout, &model, &data).with_mixing(&h).run().map_err(e)?;
        let probes = probe_points(&run, 8);
        let r = estimate_divergences(&model, &data, &layout, &probes).map_err(e)?;
        probes_seen += r.per_probe.len();
        for p in &r.per_probe {
            ensure(p.residual <= 1e-9, format!("{spec:?}: residual {:.2e}", p.residual))?;
        }
        worst = worst.max(r.max_residual);
    }
    Ok(format!("{} schemes, {probes_seen} probe points, max residual {worst:.1e}", specs.len()))
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cfel"))
}

fn sweep(axis: &str, threads: usize, out: &Path) -> Result<(), String> {
    let status = cli()
        .args(["--threads", &threads.to_string(), "sweep", "--preset", "desk-logistic", "--axis", axis, "--parallel"])
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        status.status.success(),
        format!("sweep {axis} failed: {}", String::from_utf8_lossy(&status.stderr)),
    )
}

struct Cell {
    name: String,
    seeds: usize,
    mean: f64,
    se: f64,
}

fn read_summary(dir: &Path) -> Result<Vec<Cell>, String> {
    let mut rdr = csv::Reader::from_path(dir.join("summary.csv")).map_err(|e| e.to_string())?;
    let mut cells = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| e.to_string())?;
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| e.to_string());
        cells.push(Cell {
            name: row[0].to_string(),
            seeds: row[1].parse().map_err(|e: std::num::ParseIntError| e.to_string())?,
            mean: num(2)?,
            se: num(3)?,
        });
    }
    Ok(cells)
}

/// `a ≥ b` in the convergence sense: `a` ends at a lower mean loss, or within
/// one pooled standard error of `b`.
fn at_least_as_good(a: &Cell, b: &Cell) -> bool {
    let pooled = (a.se * a.se + b.se * b.se).sqrt();
    a.mean <= b.mean + pooled
}

const AXES: [(&str, &[&str]); 3] = [
    ("tau_fixed_qtau", &["tau-2", "tau-4", "tau-8"]),
    ("m", &["m-4", "m-8", "m-16"]),
    ("partition", &["partition-cluster_iid", "partition-cluster_noniid"]),
];

fn trends(root: &Path) -> Result<String, String> {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (axis, order) in AXES {
        let dir = root.join(axis);
        sweep(axis, 1, &dir)?;
        let cells = read_summary(&dir)?;
        let find = |name: &str| cells.iter().find(|c| c.name == name).ok_or(format!("missing cell {name}"));
        let ordered = order.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;
        ensure(ordered.iter().all(|c| c.seeds == 5), format!("{axis}: expected 5 seeds per cell"))?;
        let chain = ordered.iter().map(|c| format!("{} {:.4}±{:.4}", c.name, c.mean, c.se)).collect::<Vec<_>>();
        notes.push(chain.join(" ≥ "));
        for w in ordered.windows(2) {
            if !at_least_as_good(w[0], w[1]) {
                failures.push(format!("{} !≥ {}", w[0].name, w[1].name));
            }
        }
    }
    let text = notes.join("; ");
    if failures.is_empty() {
        Ok(text)
    } else {
        Err(format!("{} [{text}]", failures.join(", ")))
    }
}

fn csv_files(dir: &Path, into: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            csv_files(&path, into)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            into.push(path);
        }
    }
    Ok(())
}

fn determinism(single: &Path, multi: &Path) -> Result<String, String> {
    for (axis, _) in AXES {
        sweep(axis, 8, &multi.join(axis))?;
    }
    let mut files = Vec::new();
    csv_files(single, &mut files).map_err(|e| e.to_string())?;
    files.sort();
    ensure(!files.is_empty(), "no CSV files from the single-thread runs")?;
    for a in &files {
        let rel = a.strip_prefix(single).map_err(|e| e.to_string())?;
        let b = multi.join(rel);
        let (x, y) = (fs::read(a).map_err(|e| e.to_string())?, fs::read(&b).map_err(|e| format!("{}: {e}", b.display()))?);
        ensure(x == y, format!("{} differs between 1 and 8 threads", rel.display()))?;
    }
    let mut other = Vec::new();
    csv_files(multi, &mut other).map_err(|e| e.to_string())?;
    ensure(other.len() == files.len(), "the 8-thread runs wrote a different set of CSV files")?;
    Ok(format!("{} CSV files byte-identical", files.len()))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let single = scratch.path().join("threads-1");
    let multi = scratch.path().join("threads-8");

    let mut outcomes = Vec::new();
    outcomes.push(criterion(1, "mixing-matrix invariants", secs(1), mixing_invariants));
    outcomes.push(criterion(2, "spectral values", secs(1), spectral_values));
    outcomes.push(criterion(3, "reduction equivalence", secs(10), reductions));
    let mut conservation = None;
    outcomes.push(criterion(4, "matrix-oracle equivalence", secs(10), || oracle_and_conservation(&mut conservation)));
    outcomes.push(criterion(5, "conservation", None, || {
        conservation.unwrap_or_else(|| Err("the oracle run did not complete".into()))
    }));
    outcomes.push(criterion(6, "cost model", secs(1), cost_model));
    outcomes.push(criterion(7, "convergence bound on quadratics", secs(60), theorem_bound));
    outcomes.push(criterion(8, "divergence decomposition", secs(5), decomposition));
    outcomes.push(criterion(9, "desk-scale trends", secs(600), || trends(&single)));
    outcomes.push(criterion(10, "thread-count determinism", None, || determinism(&single, &multi)));

    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} acceptance criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
