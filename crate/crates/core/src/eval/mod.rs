//! Accuracy metrics and the Monte Carlo pruning experiment.

mod metrics;
mod montecarlo;
mod report;

pub use metrics::{map_error, relative_map_error, trajectory_error, MetricResult};
pub use montecarlo::{
    build_instance, quantile, run_monte_carlo, Method, MonteCarloCell, MonteCarloConfig, MonteCarloResult,
};
pub use report::RunReport;
