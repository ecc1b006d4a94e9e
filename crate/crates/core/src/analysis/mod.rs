//! Empirical estimates of the constants in the convergence bound and the
//! bound itself.

mod bound;
mod divergence;

pub use bound::{
    corollary_rate_table, loglog_slope, lr_cap, theorem1_bound, BoundBreakdown, BoundInputs, RateRow,
};
pub use divergence::{
    divergences_at, estimate_divergences, estimate_f_inf, estimate_sigma_sq, estimate_smoothness, probe_points,
    DivergenceReport, GradNormObserver, ProbeDivergence, DEFAULT_PROBES,
};
