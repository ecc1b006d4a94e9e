//! Parameter vectors, loss models and gradient evaluation.

mod loss;
mod params;
mod sgd;

pub use loss::{full_gradient, stoch_gradient, GradSample, LossModel};
pub use params::ParamVec;
pub use sgd::sgd_step;
pub(crate) use sgd::{apply_momentum, check_hyper};
