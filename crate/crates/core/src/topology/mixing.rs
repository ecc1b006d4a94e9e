use nalgebra::{DMatrix, SymmetricEigen};

use super::BackhaulGraph;
use crate::error::{Error, Result};

/// Row/column sum and symmetry tolerance for a valid mixing matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default number of gossip steps per inter-cluster aggregation.
pub const DEFAULT_GOSSIP_STEPS: usize = 10;

/// Symmetric doubly stochastic weights on a backhaul graph, with its
/// second-largest eigenvalue magnitude `zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    entries: DMatrix<f64>,
    zeta: f64,
    pub pi_default: usize,
}

impl MixingMatrix {
    /// `H_ij = 1/(1 + max(deg_i, deg_j))` on edges, remainder on the diagonal.
    pub fn metropolis(graph: &BackhaulGraph) -> Result<Self> {
        let deg = graph.degrees();
        Self::from_edge_weights(graph, |i, j| 1.0 / (1.0 + deg[i].max(deg[j]) as f64))
    }

    /// Every edge weighted `1/(Δ + 1)` with `Δ` the maximum degree.
    pub fn max_degree(graph: &BackhaulGraph) -> Result<Self> {
        let w = 1.0 / (1.0 + graph.degrees().into_iter().max().unwrap_or(0) as f64);
        Self::from_edge_weights(graph, |_, _| w)
    }

    fn from_edge_weights(graph: &BackhaulGraph, w: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let m = graph.m();
        let mut h = DMatrix::zeros(m, m);
        for (i, j) in graph.edges() {
            let v = w(i, j);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| h[(i, j)]).sum();
            h[(i, i)] = 1.0 - off;
        }
        Self::from_matrix(h, Some(graph))
    }

    /// Validates an explicit matrix: non-negative, symmetric, rows and columns
    /// summing to one, off-diagonal support equal to the graph's edges (when a
    /// graph is given), and `zeta < 1`.
    pub fn from_matrix(entries: DMatrix<f64>, graph: Option<&BackhaulGraph>) -> Result<Self> {
        validate(&entries, graph)?;
        let zeta = spectral_zeta(&entries)?;
        if zeta >= 1.0 - STOCHASTIC_TOL {
            return Err(Error::invariant(format!(
                "second-largest eigenvalue magnitude {zeta} is not below 1"
            )));
        }
        Ok(MixingMatrix {
            entries,
            zeta,
            pi_default: DEFAULT_GOSSIP_STEPS,
        })
    }

    /// `(1 − ζ) I + ζ J` on a complete graph: the simplest matrix with a
    /// prescribed `ζ ∈ [0, 1)`.
    pub fn lazy_complete(m: usize, zeta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&zeta) {
            return Err(Error::domain(format!("zeta must lie in [0, 1), got {zeta}")));
        }
        let j = 1.0 / m as f64;
        let h = DMatrix::from_fn(m, m, |a, b| {
            (1.0 - zeta) * j + if a == b { zeta } else { 0.0 }
        });
        Self::from_matrix(h, None)
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn power(&self, pi: usize) -> DMatrix<f64> {
        gossip_power(&self.entries, pi)
    }
}

/// Checks symmetry, double stochasticity, nonnegativity and (with a graph)
/// the sparsity pattern of a candidate mixing matrix.
pub fn validate(h: &DMatrix<f64>, graph: Option<&BackhaulGraph>) -> Result<()> {
    let m = h.nrows();
    if m == 0 || h.ncols() != m {
        return Err(Error::invariant(format!("mixing matrix must be square, got {}×{}", h.nrows(), h.ncols())));
    }
    if let Some(g) = graph {
        if g.m() != m {
            return Err(Error::invariant(format!("{m}×{m} mixing matrix for a graph of {} servers", g.m())));
        }
    }
    for i in 0..m {
        for j in 0..m {
            let v = h[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invariant(format!("entry ({i}, {j}) = {v} is not a non-negative weight")));
            }
            if (v - h[(j, i)]).abs() > STOCHASTIC_TOL {
                return Err(Error::invariant(format!("not symmetric at ({i}, {j})")));
            }
            if let Some(g) = graph {
                if i != j && (v > 0.0) != g.has_edge(i, j) {
                    return Err(Error::invariant(format!(
                        "weight at ({i}, {j}) does not match the graph's edge set"
                    )));
                }
            }
        }
        let row: f64 = h.row(i).sum();
        let col: f64 = h.column(i).sum();
        if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::invariant(format!(
                "row/column {i} sums to {row}/{col}, not 1"
            )));
        }
    }
    Ok(())
}

/// `max(|λ₂|, |λ_m|)` of a symmetric matrix, eigenvalues sorted descending.
pub fn spectral_zeta(h: &DMatrix<f64>) -> Result<f64> {
    let m = h.nrows();
    if h.ncols() != m {
        return Err(Error::invariant("spectral_zeta needs a square matrix"));
    }
    if (h - h.transpose()).amax() > STOCHASTIC_TOL {
        return Err(Error::invariant("spectral_zeta needs a symmetric matrix"));
    }
    if m == 1 {
        return Ok(0.0);
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig[1].abs().max(eig[m - 1].abs()))
}

/// `H^π` by repeated multiplication; `π = 0` gives the identity.
pub fn gossip_power(h: &DMatrix<f64>, pi: usize) -> DMatrix<f64> {
    let m = h.nrows();
    let mut out = DMatrix::identity(m, m);
    for _ in 0..pi {
        out = &out * h;
    }
    out
}

/// Topology constants of the convergence bound:
/// `Ω₁ = ζ^{2π}/(1 − ζ^{2π})`,
/// `Ω₂ = 1/(1 − ζ^{2π}) + 2/(1 − ζ^π) + ζ^π/(1 − ζ^π)²`.
pub fn omega_constants(zeta: f64, pi: usize) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::domain(format!("zeta must lie in [0, 1), got {zeta}")));
    }
    if pi == 0 {
        return Err(Error::domain("gossip step count must be at least 1"));
    }
    let zp = zeta.powi(pi as i32);
    let z2p = zp * zp;
    let omega1 = z2p / (1.0 - z2p);
    let omega2 = 1.0 / (1.0 - z2p) + 2.0 / (1.0 - zp) + zp / ((1.0 - zp) * (1.0 - zp));
    Ok((omega1, omega2))
}
