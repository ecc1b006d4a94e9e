use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

const ER_ATTEMPTS: u64 = 10_000;

/// Undirected, connected server graph. Edges are stored as `(i, j)` with
/// `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackhaulGraph {
    m: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphKind {
    Ring,
    Complete,
    Path,
    /// `a × b` wrap-around grid with the most square factorization of `m`
    /// having both sides ≥ 2.
    Torus,
    ErdosRenyi { edge_probability: f64 },
}

impl BackhaulGraph {
    pub fn new(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("graph needs at least one server"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::config(format!("self-loop on server {a}")));
            }
            if a >= m || b >= m {
                return Err(Error::config(format!("edge ({a}, {b}) outside 0..{m}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::config(format!("duplicate edge ({a}, {b})")));
            }
        }
        let g = BackhaulGraph { m, edges: set };
        if !g.is_connected() {
            return Err(Error::config("backhaul graph is not connected"));
        }
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.m];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    fn is_connected(&self) -> bool {
        connected(self.m, &self.edges)
    }

    /// One `"i j"` line per edge, 0-indexed.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (a, b) in self.edges() {
            writeln!(s, "{a} {b}").expect("write to String");
        }
        s
    }

    /// Parses the edge-list text format. Blank lines and `#` comments are
    /// skipped.
    pub fn from_edge_list(m: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => edges.push((a, b)),
                _ => {
                    return Err(Error::Format(format!(
                        "edge list line {}: expected two indices, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(m, edges)
    }
}

fn connected(m: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut adj = vec![Vec::new(); m];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == m
}

fn torus_shape(m: usize) -> Option<(usize, usize)> {
    (2..=m)
        .take_while(|a| a * a <= m)
        .filter(|a| m.is_multiple_of(*a))
        .last()
        .map(|a| (a, m / a))
}

/// Deterministic graph for `(kind, m, seed)`. Only Erdős–Rényi uses the seed;
/// it redraws until the sample is connected.
pub fn build_graph(kind: GraphKind, m: usize, seed: u64) -> Result<BackhaulGraph> {
    if m == 0 {
        return Err(Error::config("graph needs at least one server"));
    }
    let mut edges = BTreeSet::new();
    let mut add = |a: usize, b: usize| {
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    };
    match kind {
        GraphKind::Ring => {
            for i in 0..m {
                add(i, (i + 1) % m);
            }
        }
        GraphKind::Path => {
            for i in 1..m {
                add(i - 1, i);
            }
        }
        GraphKind::Complete => {
            for i in 0..m {
                for j in i + 1..m {
                    add(i, j);
                }
            }
        }
        GraphKind::Torus => {
            let (a, b) = torus_shape(m).ok_or_else(|| {
                Error::config(format!("torus needs m = a × b with a, b ≥ 2; {m} has no such split"))
            })?;
            for r in 0..a {
                for c in 0..b {
                    let u = r * b + c;
                    add(u, r * b + (c + 1) % b);
                    add(u, ((r + 1) % a) * b + c);
                }
            }
        }
        GraphKind::ErdosRenyi { edge_probability } => {
            if !(edge_probability > 0.0 && edge_probability <= 1.0) {
                return Err(Error::config(format!(
                    "edge probability must lie in (0, 1], got {edge_probability}"
                )));
            }
            for attempt in 0..ER_ATTEMPTS {
                let mut r = rng::stream(seed, Domain::Graph, m as u64, attempt);
                let mut cand = BTreeSet::new();
                for i in 0..m {
                    for j in i + 1..m {
                        if r.random::<f64>() < edge_probability {
                            cand.insert((i, j));
                        }
                    }
                }
                if connected(m, &cand) {
                    return BackhaulGraph::new(m, cand);
                }
            }
            return Err(Error::config(format!(
                "no connected G({m}, {edge_probability}) sample in {ER_ATTEMPTS} draws"
            )));
        }
    }
    BackhaulGraph::new(m, edges)
}
