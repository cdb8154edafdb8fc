use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bow_bench::error::BenchError;
use bow_bench::scenario::{plot_result_dir, run_scenario, PlannerKind, Scenario};
use bow_bench::suite::{run_suite, Suite};

/// Motion-planning benchmark runner.
#[derive(Parser)]
#[command(name = "bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario file and write its artifacts.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Planner override.
        #[arg(long)]
        planner: Option<PlannerKind>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for artifacts.
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
    /// Run a suite file (scenarios x planners x seeds) and write summary.csv.
    Suite {
        /// Suite JSON file.
        suite: PathBuf,
        /// Output directory for artifacts and the summary.
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render plot.svg from a result directory produced by `run` or `suite`.
    Plot {
        /// Result directory containing world.json and trajectory.csv.
        result_dir: PathBuf,
    },
}

fn base_dir_of(path: &std::path::Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Run { scenario, planner, seed, out } => {
            let base = base_dir_of(&scenario);
            let scenario = Scenario::from_file(&scenario)?;
            let record = run_scenario(&scenario, planner, seed, &base, Some(&out))?;
            let m = &record.metrics;
            println!(
                "{}: success={} steps={} length={:.3}m planning={:.2}ms avg_v={:.3} evals/round={:.2}",
                scenario.name,
                m.success,
                m.steps,
                m.trajectory_length,
                m.total_planning_time_ms,
                m.avg_velocity,
                m.evals_per_round
            );
            if let Some(dir) = &record.artifact_dir {
                println!("artifacts: {}", dir.display());
            }
            Ok(m.success)
        }
        Command::Suite { suite, out, jobs } => {
            let base = base_dir_of(&suite);
            let suite = Suite::from_file(&suite)?;
            let outcome = run_suite(&suite, &base, &out, jobs)?;
            for row in &outcome.rows {
                println!(
                    "{} [{}]: success_rate={:.2} seeds={} evals/round={:.2}",
                    row.env,
                    row.planner.as_str(),
                    row.success_rate,
                    row.seed_count,
                    row.obj_evals_mean
                );
            }
            println!("summary: {}", outcome.csv_path.display());
            Ok(outcome.all_mandatory_ok)
        }
        Command::Plot { result_dir } => {
            let path = plot_result_dir(&result_dir)?;
            println!("plot: {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
