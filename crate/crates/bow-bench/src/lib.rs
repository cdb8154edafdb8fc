//! Benchmark harness for the window-based CBO planner and its grid-search
//! baseline: scenario files, metrics, suites, and plots.

pub mod error;
pub mod metrics;
pub mod plot;
pub mod scenario;
pub mod suite;

pub use error::BenchError;
pub use metrics::{compute_metrics, MetricsRecord};
pub use scenario::{run_scenario, PlannerKind, Scenario};
pub use suite::{run_suite, Suite};
