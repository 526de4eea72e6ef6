//! Heterogeneity measurement, rate fitting and the trace audits behind the
//! lower-bound checks.

mod audit;
mod heterogeneity;
mod rates;


pub use audit::{
    audit_distance_conserving, audit_zero_respecting, wild_guess_baseline, SupportAudit, Violation, SUPPORT_THRESHOLD,
};
pub use heterogeneity::{
    conserving_radius, gradient_gap, hard_ball_zeta, measure_heterogeneity, value_gap, HeterogeneityReport, Probe,
    DEFAULT_BALL_C,
};
pub use rates::{fit_rate_slope, slope};
