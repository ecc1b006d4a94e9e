use serde::{Deserialize, Serialize};

/// Metrics at the end of one global round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based global round.
    pub round: usize,
    /// Local iterations completed, `round · qτ`.
    pub t: usize,
    /// Cumulative simulated wall-clock seconds (zero without a system profile).
    pub wall_sim_seconds: f64,
    /// Global objective averaged over edge models, weighted by cluster size.
    pub global_loss: f64,
    /// Accuracy on the common test set, averaged the same way.
    pub test_accuracy: Option<f64>,
    /// `‖∇F(u)‖²` at the device-average model `u`.
    pub grad_norm_sq: f64,
    /// `max_i ‖y_i − ȳ‖` over edge models.
    pub spread: f64,
}
