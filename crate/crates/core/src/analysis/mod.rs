//! Ensemble statistics and the hypothesis tests run against them.

mod covariance;
mod fluctuation;
mod marginal;
mod renewal;
mod report;
mod stats;

pub use covariance::{bridge_covariance_test, covariance_ratio_test, exact_covariance_test};
pub use fluctuation::{max_fluctuation_stats, FluctuationSummary};
pub(crate) use fluctuation::quantile;
pub use marginal::{kolmogorov_tail, ks_critical_value, ks_distance, ks_p_value, marginal_gaussian_test};
pub use renewal::{increment_tail_test, independence_diagnostic, lag_one_correlation};
pub use report::{render_table, Comparison, TestReport};
pub use stats::{
    default_grid, empirical_covariance, merge_stats, Estimate, SummaryStats, FRACTION_BITS, VALUE_LIMIT,
};
