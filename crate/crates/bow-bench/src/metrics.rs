//! Benchmark metrics computed from executed plans.

use std::time::Duration;

use bow_core::geometry::dist;
use bow_core::planner::PlanResult;
use serde::{Deserialize, Serialize};

/// Per-run metrics row.
///
/// `avg_jerk` is the signed mean of the second finite difference of linear
/// speed divided by `dt^2` (zero when fewer than three speed samples exist).
/// Timing covers planning computation only: rollout integration and
/// collision validation inside planning rounds count, applying controls and
/// file I/O do not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Executed integration steps.
    pub steps: usize,
    /// Sum of consecutive position distances (m).
    pub trajectory_length: f64,
    pub total_planning_time_ms: f64,
    /// `total_planning_time_ms / steps`.
    pub time_per_step_ms: f64,
    /// `trajectory_length / (steps * dt)` (m/s).
    pub avg_velocity: f64,
    pub avg_jerk: f64,
    pub success: bool,
    /// Total true objective/constraint evaluations across all rounds.
    pub objective_evaluations: usize,
    pub planning_rounds: usize,
    /// Mean true evaluations per sampling round (resampling rounds count
    /// separately; each consumes its own sample budget).
    pub evals_per_round: f64,
}

pub fn compute_metrics(result: &PlanResult<f64>, timing: Duration, dt: f64) -> MetricsRecord {
    let steps = result.executed_steps();
    let positions: Vec<Vec<f64>> = result
        .states
        .iter()
        .map(|s| s.position().as_slice().to_vec())
        .collect();
    let trajectory_length: f64 = positions
        .windows(2)
        .map(|w| dist(&w[0], &w[1]))
        .sum();
    let speeds: Vec<f64> = result.states.iter().map(|s| s.speed()).collect();
    let avg_jerk = if speeds.len() >= 3 {
        let second_differences: Vec<f64> = speeds
            .windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .collect();
        let mean: f64 =
            second_differences.iter().sum::<f64>() / second_differences.len() as f64;
        mean / (dt * dt)
    } else {
        0.0
    };
    let total_planning_time_ms = timing.as_secs_f64() * 1e3;
    let planning_rounds = result.steps.len();
    let sampling_rounds: usize = result.steps.iter().map(|s| s.resample_rounds + 1).sum();
    let objective_evaluations = result.total_evaluations();
    MetricsRecord {
        steps,
        trajectory_length,
        total_planning_time_ms,
        time_per_step_ms: if steps > 0 { total_planning_time_ms / steps as f64 } else { 0.0 },
        avg_velocity: if steps > 0 { trajectory_length / (steps as f64 * dt) } else { 0.0 },
        avg_jerk,
        success: result.success,
        objective_evaluations,
        planning_rounds,
        evals_per_round: if sampling_rounds > 0 {
            objective_evaluations as f64 / sampling_rounds as f64
        } else {
            0.0
        },
    }
}
