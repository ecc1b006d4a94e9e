//! Synthetic fleets, IDX ingestion and device/cluster partitioning.

mod dataset;
mod idx;
mod partition;
mod synth;

pub use dataset::{Dataset, DeviceDataset};
pub use idx::{encode_idx, load_idx_subset, parse_idx_images, parse_idx_labels};
pub use partition::{partition, train_test_split, PartitionManifest, PartitionSpec};
pub use synth::{make_classification, make_quadratic_fleet, QuadraticFleet};
