//! Suite runner: cross product of scenarios, planners, and seeds, with
//! mean/std aggregation into a CSV summary.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::metrics::MetricsRecord;
use crate::scenario::{run_scenario, PlannerKind, Scenario};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Suite {
    pub scenarios: Vec<Scenario>,
    pub seeds: Vec<u64>,
    /// When present, every scenario runs under every listed planner;
    /// otherwise each scenario runs under its own.
    #[serde(default)]
    pub planners: Option<Vec<PlannerKind>>,
}

impl Suite {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let text = fs::read_to_string(&path).map_err(|e| {
            BenchError::Usage(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        let suite: Suite = serde_json::from_str(&text)
            .map_err(|e| BenchError::Usage(format!("invalid suite: {e}")))?;
        if suite.seeds.is_empty() {
            return Err(BenchError::Usage("suite needs at least one seed".into()));
        }
        Ok(suite)
    }
}

/// Aggregated row for one (scenario, planner) cell.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub env: String,
    pub planner: PlannerKind,
    pub seed_count: usize,
    pub optional: bool,
    pub success_rate: f64,
    /// Mean/std over successful runs; `None` when no run succeeded.
    pub stats: Option<CellStats>,
    /// Mean true evaluations per planning round over all completed runs.
    pub obj_evals_mean: f64,
    pub hard_errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellStats {
    pub steps: (f64, f64),
    pub traj_length_m: (f64, f64),
    pub total_time_ms: (f64, f64),
    pub time_per_step_ms: f64,
    pub avg_velocity: (f64, f64),
    pub avg_jerk: (f64, f64),
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn aggregate(
    env: &str,
    planner: PlannerKind,
    optional: bool,
    runs: &[Result<MetricsRecord, String>],
) -> SummaryRow {
    let completed: Vec<&MetricsRecord> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let hard_errors = runs.len() - completed.len();
    let successes: Vec<&&MetricsRecord> = completed.iter().filter(|m| m.success).collect();
    let success_rate = if runs.is_empty() {
        0.0
    } else {
        successes.len() as f64 / runs.len() as f64
    };
    let stats = if successes.is_empty() {
        None
    } else {
        let collect = |f: fn(&MetricsRecord) -> f64| -> Vec<f64> {
            successes.iter().map(|m| f(m)).collect()
        };
        let steps = mean_std(&collect(|m| m.steps as f64));
        let total_time = mean_std(&collect(|m| m.total_planning_time_ms));
        Some(CellStats {
            steps,
            traj_length_m: mean_std(&collect(|m| m.trajectory_length)),
            total_time_ms: total_time,
            time_per_step_ms: if steps.0 > 0.0 { total_time.0 / steps.0 } else { 0.0 },
            avg_velocity: mean_std(&collect(|m| m.avg_velocity)),
            avg_jerk: mean_std(&collect(|m| m.avg_jerk)),
        })
    };
    let obj_evals_mean = if completed.is_empty() {
        0.0
    } else {
        completed.iter().map(|m| m.evals_per_round).sum::<f64>() / completed.len() as f64
    };
    SummaryRow {
        env: env.to_string(),
        planner,
        seed_count: runs.len(),
        optional,
        success_rate,
        stats,
        obj_evals_mean,
        hard_errors,
    }
}

pub const SUMMARY_COLUMNS: &str = "env,planner,seed_count,steps_mean,steps_std,traj_length_m_mean,traj_length_m_std,total_time_ms_mean,total_time_ms_std,time_per_step_ms,avg_velocity_mean,avg_velocity_std,avg_jerk_mean,avg_jerk_std,success_rate,obj_evals_mean";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_COLUMNS);
    out.push('\n');
    for row in rows {
        let cell = |v: f64| format!("{v:.4}");
        let stats = match &row.stats {
            Some(s) => [
                cell(s.steps.0),
                cell(s.steps.1),
                cell(s.traj_length_m.0),
                cell(s.traj_length_m.1),
                cell(s.total_time_ms.0),
                cell(s.total_time_ms.1),
                cell(s.time_per_step_ms),
                cell(s.avg_velocity.0),
                cell(s.avg_velocity.1),
                cell(s.avg_jerk.0),
                cell(s.avg_jerk.1),
            ]
            .join(","),
            // Dash-equivalent empty cells when no solution exists.
            None => ",".repeat(10),
        };
        out.push_str(&format!(
            "{},{},{},{},{:.4},{}\n",
            row.env,
            row.planner.as_str(),
            row.seed_count,
            stats,
            row.success_rate,
            cell(row.obj_evals_mean)
        ));
    }
    out
}

pub struct SuiteOutcome {
    pub rows: Vec<SummaryRow>,
    pub csv_path: PathBuf,
    /// True when every non-optional cell completed with at least one
    /// success and no hard errors.
    pub all_mandatory_ok: bool,
}

/// Runs the whole suite with up to `jobs` worker threads and writes
/// `summary.csv` under `out_dir`. Per-run failures are recorded and the
/// suite continues.
pub fn run_suite(
    suite: &Suite,
    base_dir: &Path,
    out_dir: &Path,
    jobs: usize,
) -> Result<SuiteOutcome, BenchError> {
    fs::create_dir_all(out_dir)?;
    let mut cells: Vec<(usize, PlannerKind)> = Vec::new();
    for (i, scenario) in suite.scenarios.iter().enumerate() {
        match &suite.planners {
            Some(planners) => {
                for planner in planners {
                    cells.push((i, *planner));
                }
            }
            None => cells.push((i, suite.scenarios[i].planner)),
        }
        let _ = scenario;
    }

    // Work queue of (cell index, seed index).
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..suite.seeds.len()).map(move |s| (c, s)))
        .collect();
    let queue = Mutex::new(VecDeque::from(tasks));
    let results: Mutex<Vec<Vec<Option<Result<MetricsRecord, String>>>>> =
        Mutex::new(vec![vec![None; suite.seeds.len()]; cells.len()]);

    let workers = jobs.max(1).min(cells.len() * suite.seeds.len().max(1)).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let task = queue.lock().expect("queue lock").pop_front();
                let Some((cell, seed_idx)) = task else { break };
                let (scenario_idx, planner) = cells[cell];
                let scenario = &suite.scenarios[scenario_idx];
                let seed = suite.seeds[seed_idx];
                let outcome =
                    run_scenario(scenario, Some(planner), Some(seed), base_dir, Some(out_dir))
                        .map(|record| record.metrics)
                        .map_err(|e| e.to_string());
                results.lock().expect("results lock")[cell][seed_idx] = Some(outcome);
            });
        }
    });

    let results = results.into_inner().expect("results lock");
    let mut rows = Vec::with_capacity(cells.len());
    for (cell, (scenario_idx, planner)) in cells.iter().enumerate() {
        let scenario = &suite.scenarios[*scenario_idx];
        let runs: Vec<Result<MetricsRecord, String>> = results[cell]
            .iter()
            .cloned()
            .map(|r| r.expect("all tasks completed"))
            .collect();
        rows.push(aggregate(&scenario.name, *planner, scenario.optional, &runs));
    }

    let all_mandatory_ok = rows
        .iter()
        .filter(|r| !r.optional)
        .all(|r| r.hard_errors == 0 && r.stats.is_some());

    let csv_path = out_dir.join("summary.csv");
    fs::write(&csv_path, summary_csv(&rows))?;
    Ok(SuiteOutcome { rows, csv_path, all_mandatory_ok })
}
