//! Estimators and diagnostics.

pub mod assumptions;
pub mod dual;
pub mod regret;
pub mod stats;

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionContext, AssumptionReport, CheckStatus, Scaling};
pub use dual::{
    estimate_dual_point, estimate_monotonicity, find_stationary_multiplier, mean_profile, symmetric_stationary_profile,
    DualEstimates, DualSamples, RootSearch, StationaryRoot,
};
pub use regret::{convergence_distance, regret_from_cost, regret_vs_hindsight};
pub use stats::{fit_loglog_slope, mean_ci, t_quantile_95, MeanCi, SlopeFit};
