//! Backhaul graphs, mixing matrices and their spectral constants.

mod graph;
mod mixing;

pub use graph::{build_graph, BackhaulGraph, GraphKind};
pub use mixing::{
    gossip_power, omega_constants, spectral_zeta, validate, MixingMatrix, DEFAULT_GOSSIP_STEPS,
    STOCHASTIC_TOL,
};
