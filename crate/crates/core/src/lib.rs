//! Simulator for cooperative federated edge learning: devices grouped under
//! edge servers run local SGD, servers average their devices and gossip with
//! neighbouring servers over a backhaul graph.

pub mod analysis;
pub mod costmodel;
pub mod datagen;
pub mod engine;
mod error;
pub mod io;
pub mod numerics;
pub mod par;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
