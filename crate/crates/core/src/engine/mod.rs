mod aggregate;
mod config;
mod layout;
pub mod oracle;
mod record;
pub mod reference;
mod run;

pub use aggregate::{inter_aggregate, intra_aggregate, member_weights};
pub use config::{Algorithm, RunConfig, TauUnit, Weighting};
pub use layout::ClusterLayout;
pub use oracle::run_matrix_oracle;
pub use record::RoundRecord;
pub use run::{
    global_gradient, global_loss, sample_batch, sample_gradient, AggregationOp, Observer, RunOutput, Simulation,
    StepView, TrajectoryRecorder, DIVERGENCE_LIMIT,
};
