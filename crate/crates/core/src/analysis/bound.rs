use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::omega_constants;

/// Constants of the CE-FedAvg convergence bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Smoothness `L`.
    pub l: f64,
    pub sigma_sq: f64,
    /// Inter-cluster divergence `ε²`.
    pub eps_sq: f64,
    /// Intra-cluster divergences `ε_i²`.
    pub eps_i_sq: Vec<f64>,
    /// Cluster sizes `n_i`.
    pub cluster_sizes: Vec<usize>,
    pub zeta: f64,
    pub pi: usize,
    pub tau: usize,
    pub q: usize,
    pub lr: f64,
    /// Total local iterations `T`.
    pub t_total: usize,
    /// `F(x₁) − F_inf`.
    pub f_gap: f64,
}

impl BoundInputs {
    pub fn n(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn m(&self) -> usize {
        self.cluster_sizes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub terms: [f64; 6],
    pub total: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub lr_cap: f64,
    /// Whether `η` satisfies the learning-rate condition. The bound is only
    /// guaranteed when it does.
    pub lr_ok: bool,
}

/// Largest admissible step, `min{1/(2Lτ), 1/(2√(2Ω₂) L q τ)}`.
pub fn lr_cap(l: f64, tau: usize, q: usize, zeta: f64, pi: usize) -> Result<f64> {
    let (_, omega2) = omega_constants(zeta, pi)?;
    let (tau, q) = (tau as f64, q as f64);
    Ok((1.0 / (2.0 * l * tau)).min(1.0 / (2.0 * (2.0 * omega2).sqrt() * l * q * tau)))
}

pub fn theorem1_bound(b: &BoundInputs) -> Result<BoundBreakdown> {
    if b.eps_i_sq.len() != b.cluster_sizes.len() {
        return Err(Error::config("eps_i_sq and cluster_sizes differ in length"));
    }
    if b.cluster_sizes.contains(&0) || b.cluster_sizes.is_empty() {
        return Err(Error::config("every cluster needs at least one device"));
    }
    if !(b.l > 0.0 && b.lr > 0.0 && b.t_total > 0 && b.tau > 0 && b.q > 0) {
        return Err(Error::domain("L, η, T, τ and q must be positive"));
    }
    let (omega1, omega2) = omega_constants(b.zeta, b.pi)?;
    let n = b.n() as f64;
    let m = b.m() as f64;
    let (l, s2, eta) = (b.l, b.sigma_sq, b.lr);
    let (tau, q, t) = (b.tau as f64, b.q as f64, b.t_total as f64);
    let e2 = eta * eta * l * l;
    let weighted_intra: f64 = b
        .cluster_sizes
        .iter()
        .zip(&b.eps_i_sq)
        .map(|(&ni, e)| ni as f64 / n * e)
        .sum();
    let terms = [
        2.0 * b.f_gap / (eta * t),
        eta * l * s2 / n,
        8.0 * e2 * (omega1 * q * tau + (m - 1.0) / n * q * tau) * s2,
        16.0 * e2 * q * q * tau * tau * omega2 * b.eps_sq,
        4.0 * (n - m) / n * e2 * tau * s2,
        8.0 * e2 * tau * tau * weighted_intra,
    ];
    let cap = lr_cap(l, b.tau, b.q, b.zeta, b.pi)?;
    Ok(BoundBreakdown {
        total: terms.iter().sum(),
        terms,
        omega1,
        omega2,
        lr_cap: cap,
        lr_ok: eta <= cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub t_total: usize,
    pub lr: f64,
    /// `None` when `η = √(n/T)/L` violates the learning-rate condition.
    pub bound: Option<f64>,
    /// `T > q⁴τ⁴`, where the leading `1/√T` term dominates.
    pub beyond_threshold: bool,
}

/// The bound along a grid of `T` with `η = (1/L)√(n/T)`; `base.lr` and
/// `base.t_total` are ignored.
pub fn corollary_rate_table(base: &BoundInputs, t_grid: &[usize]) -> Result<Vec<RateRow>> {
    let n = base.n() as f64;
    let threshold = (base.q as f64 * base.tau as f64).powi(4);
    t_grid
        .iter()
        .map(|&t| {
            let lr = (n / t as f64).sqrt() / base.l;
            let b = theorem1_bound(&BoundInputs {
                lr,
                t_total: t,
                ..base.clone()
            })?;
            Ok(RateRow {
                t_total: t,
                lr,
                bound: b.lr_ok.then_some(b.total),
                beyond_threshold: t as f64 > threshold,
            })
        })
        .collect()
}

/// Least-squares slope of `log bound` against `log T` over feasible rows.
pub fn loglog_slope(rows: &[RateRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.bound.map(|b| ((r.t_total as f64).ln(), b.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
