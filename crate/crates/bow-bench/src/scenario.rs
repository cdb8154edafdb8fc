//! Scenario definitions (JSON) and the single-scenario runner.

use std::fs;
use std::path::{Path, PathBuf};

use bow_core::dwa::{run_dwa, DwaConfig};
use bow_core::geometry::Aabb;
use bow_core::kinematics::{KinodynamicLimits, QuadrotorState, RobotState, UnicycleState};
use bow_core::planner::{run, ConstraintAggregation, HyperMode, PlanResult, PlannerConfig, TerminationReason};
use bow_core::world::{
    generate_box_field, generate_bugtrap, generate_poisson_forest, load_world, world_from_json,
    SafetyConfig, World,
};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::metrics::{compute_metrics, MetricsRecord};
use crate::plot::{emit_plot, PlotSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Bow,
    Dwa,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Bow => "bow",
            PlannerKind::Dwa => "dwa",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bow" => Ok(PlannerKind::Bow),
            "dwa" => Ok(PlannerKind::Dwa),
            other => Err(format!("unknown planner \"{other}\" (expected bow or dwa)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Unicycle,
    Quadrotor,
}

/// Where a scenario's world comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorldSource {
    File { file: String },
    Generator { generator: GeneratorSpec },
    Inline { inline: serde_json::Value },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    BoxField {
        seed: u64,
        bounds: Aabb<f64>,
        count: usize,
        size_range: (f64, f64),
        start: Vec<f64>,
        goal: Vec<f64>,
        clearance: f64,
    },
    PoissonForest {
        seed: u64,
        bounds: Aabb<f64>,
        density: f64,
        radius_range: (f64, f64),
        start: Vec<f64>,
        goal: Vec<f64>,
        clearance: f64,
    },
    Bugtrap {
        opening_width: f64,
        wall_thickness: f64,
        trap_size: f64,
        start: Vec<f64>,
        goal: Vec<f64>,
    },
}

/// Optional overrides for planner and baseline knobs; anything omitted keeps
/// the model defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub dt: Option<f64>,
    pub horizon_steps: Option<usize>,
    pub apply_steps: Option<usize>,
    pub goal_radius: Option<f64>,
    pub sample_budget: Option<usize>,
    pub init_samples: Option<usize>,
    pub max_resample_rounds: Option<usize>,
    pub candidate_budget: Option<usize>,
    pub tau_w: Option<f64>,
    pub step_limit: Option<usize>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub a_max: Option<f64>,
    pub omega_max: Option<f64>,
    pub alpha_max: Option<f64>,
    pub speed_max: Option<[f64; 3]>,
    pub accel_max: Option<[f64; 3]>,
    pub yaw_rate_max: Option<f64>,
    pub yaw_accel_max: Option<f64>,
    pub r_robot: Option<f64>,
    pub margin: Option<f64>,
    pub constraint_mode: Option<String>,
    pub hyper_mode: Option<String>,
    pub tracking_gain: Option<f64>,
    pub dwa_resolution: Option<Vec<usize>>,
    pub dwa_goal_weight: Option<f64>,
    pub dwa_clearance_weight: Option<f64>,
    pub dwa_velocity_weight: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub world: WorldSource,
    #[serde(default)]
    pub model: ModelKind,
    /// Start state override; defaults to the world's start annotation with
    /// the heading aimed at the goal.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// Goal position override; defaults to the world's goal annotation.
    #[serde(default)]
    pub goal: Option<Vec<f64>>,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default)]
    pub seed: u64,
    /// Optional scenarios may fail without failing a suite.
    #[serde(default)]
    pub optional: bool,
    #[serde(default)]
    pub config: ConfigOverrides,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| BenchError::Usage(format!("invalid scenario: {e}")))?;
        if scenario.name.is_empty() {
            return Err(BenchError::Usage("scenario name must not be empty".into()));
        }
        Ok(scenario)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let text = fs::read_to_string(&path).map_err(|e| {
            BenchError::Usage(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }
}

fn apply_overrides(cfg: &mut PlannerConfig<f64>, model: ModelKind, o: &ConfigOverrides) -> Result<(), BenchError> {
    if let Some(v) = o.dt {
        cfg.dt = v;
    }
    if let Some(v) = o.horizon_steps {
        cfg.horizon_steps = v;
    }
    if let Some(v) = o.apply_steps {
        cfg.apply_steps = v;
    }
    if let Some(v) = o.goal_radius {
        cfg.goal_radius = v;
    }
    if let Some(v) = o.sample_budget {
        cfg.sample_budget = v;
    }
    if let Some(v) = o.init_samples {
        cfg.init_samples = v;
    }
    if let Some(v) = o.max_resample_rounds {
        cfg.max_resample_rounds = v;
    }
    if let Some(v) = o.candidate_budget {
        cfg.candidate_budget = v;
    }
    if let Some(v) = o.tau_w {
        cfg.tau_w = Some(v);
    }
    if let Some(v) = o.step_limit {
        cfg.step_limit = v;
    }
    if let Some(v) = o.tracking_gain {
        cfg.tracking_gain = v;
    }
    match model {
        ModelKind::Unicycle => {
            let mut axes = (0.0, 1.0, 0.5, 0.6981, 2.0472);
            axes.0 = cfg.limits.axes[0].min;
            axes.1 = cfg.limits.axes[0].max;
            axes.2 = cfg.limits.axes[0].max_accel;
            axes.3 = cfg.limits.axes[1].max;
            axes.4 = cfg.limits.axes[1].max_accel;
            let limits = KinodynamicLimits::unicycle(
                o.v_min.unwrap_or(axes.0),
                o.v_max.unwrap_or(axes.1),
                o.a_max.unwrap_or(axes.2),
                o.omega_max.unwrap_or(axes.3),
                o.alpha_max.unwrap_or(axes.4),
            )
            .map_err(|e| BenchError::Usage(format!("invalid limits: {e}")))?;
            cfg.limits = limits;
        }
        ModelKind::Quadrotor => {
            let speed = o.speed_max.unwrap_or([
                cfg.limits.axes[0].max,
                cfg.limits.axes[1].max,
                cfg.limits.axes[2].max,
            ]);
            let accel = o.accel_max.unwrap_or([
                cfg.limits.axes[0].max_accel,
                cfg.limits.axes[1].max_accel,
                cfg.limits.axes[2].max_accel,
            ]);
            let limits = KinodynamicLimits::quadrotor(
                speed,
                accel,
                o.yaw_rate_max.unwrap_or(cfg.limits.axes[3].max),
                o.yaw_accel_max.unwrap_or(cfg.limits.axes[3].max_accel),
            )
            .map_err(|e| BenchError::Usage(format!("invalid limits: {e}")))?;
            cfg.limits = limits;
        }
    }
    if let Some(v) = o.r_robot {
        cfg.safety.r_robot = v;
    }
    if let Some(v) = o.margin {
        cfg.safety.margin = v;
    }
    if let Some(mode) = &o.constraint_mode {
        cfg.constraint_mode = match mode.as_str() {
            "rollout_max" => ConstraintAggregation::RolloutMax,
            "first_step" => ConstraintAggregation::FirstStep,
            other => {
                return Err(BenchError::Usage(format!(
                    "unknown constraint_mode \"{other}\""
                )))
            }
        };
    }
    if let Some(mode) = &o.hyper_mode {
        cfg.hyper_mode = match mode.as_str() {
            "fixed" => HyperMode::FixedScaled,
            "ml2" => HyperMode::MaximumLikelihood,
            other => return Err(BenchError::Usage(format!("unknown hyper_mode \"{other}\""))),
        };
    }
    Ok(())
}

fn build_world(
    source: &WorldSource,
    safety: &SafetyConfig<f64>,
    base_dir: &Path,
) -> Result<World<f64>, BenchError> {
    match source {
        WorldSource::File { file } => {
            let path = if Path::new(file).is_absolute() {
                PathBuf::from(file)
            } else {
                base_dir.join(file)
            };
            Ok(load_world(&path)?)
        }
        WorldSource::Generator { generator } => Ok(match generator {
            GeneratorSpec::BoxField { seed, bounds, count, size_range, start, goal, clearance } => {
                generate_box_field(*seed, bounds, *count, *size_range, start, goal, *clearance)?
            }
            GeneratorSpec::PoissonForest {
                seed,
                bounds,
                density,
                radius_range,
                start,
                goal,
                clearance,
            } => generate_poisson_forest(
                *seed,
                bounds,
                *density,
                *radius_range,
                start,
                goal,
                *clearance,
            )?,
            GeneratorSpec::Bugtrap { opening_width, wall_thickness, trap_size, start, goal } => {
                generate_bugtrap(*opening_width, *wall_thickness, *trap_size, start, goal, safety)?
            }
        }),
        WorldSource::Inline { inline } => Ok(world_from_json(&inline.to_string())?),
    }
}

fn resolve_start(
    scenario: &Scenario,
    world: &World<f64>,
    goal: &[f64],
) -> Result<RobotState<f64>, BenchError> {
    let fallback_position = || {
        world.start.clone().ok_or_else(|| {
            BenchError::Usage(format!(
                "scenario \"{}\" has no start and the world carries none",
                scenario.name
            ))
        })
    };
    match scenario.model {
        ModelKind::Unicycle => {
            let values = match &scenario.start {
                Some(v) => v.clone(),
                None => fallback_position()?,
            };
            let state = match values.len() {
                2 => {
                    // Face the goal.
                    let theta = (goal[1] - values[1]).atan2(goal[0] - values[0]);
                    UnicycleState::at_pose(values[0], values[1], theta)
                }
                3 => UnicycleState::at_pose(values[0], values[1], values[2]),
                5 => UnicycleState::new(values[0], values[1], values[2], values[3], values[4]),
                n => {
                    return Err(BenchError::Usage(format!(
                        "unicycle start must have 2, 3, or 5 values, got {n}"
                    )))
                }
            };
            Ok(RobotState::Unicycle(state))
        }
        ModelKind::Quadrotor => {
            let values = match &scenario.start {
                Some(v) => v.clone(),
                None => fallback_position()?,
            };
            let state = match values.len() {
                3 => QuadrotorState::at_position([values[0], values[1], values[2]], 0.0),
                4 => QuadrotorState::at_position([values[0], values[1], values[2]], values[3]),
                12 => QuadrotorState {
                    position: [values[0], values[1], values[2]],
                    yaw: values[3],
                    linear_velocity: [values[4], values[5], values[6]],
                    yaw_rate: values[7],
                    linear_acceleration: [values[8], values[9], values[10]],
                    yaw_acceleration: values[11],
                },
                n => {
                    return Err(BenchError::Usage(format!(
                        "quadrotor start must have 3, 4, or 12 values, got {n}"
                    )))
                }
            };
            Ok(RobotState::Quadrotor(state))
        }
    }
}

/// Fully resolved run parameters.
pub struct ResolvedScenario {
    pub world: World<f64>,
    pub start: RobotState<f64>,
    pub goal: Vec<f64>,
    pub planner: PlannerKind,
    pub config: PlannerConfig<f64>,
    pub dwa: DwaConfig<f64>,
}

pub fn resolve(
    scenario: &Scenario,
    planner_override: Option<PlannerKind>,
    seed_override: Option<u64>,
    base_dir: &Path,
) -> Result<ResolvedScenario, BenchError> {
    let mut config = match scenario.model {
        ModelKind::Unicycle => PlannerConfig::unicycle_defaults(),
        ModelKind::Quadrotor => PlannerConfig::quadrotor_defaults(),
    };
    apply_overrides(&mut config, scenario.model, &scenario.config)?;
    config.seed = seed_override.unwrap_or(scenario.seed);
    config
        .validate()
        .map_err(|e| BenchError::Usage(format!("scenario \"{}\": {e}", scenario.name)))?;

    let world = build_world(&scenario.world, &config.safety, base_dir).map_err(|e| match e {
        BenchError::Usage(msg) => BenchError::Usage(format!("{}: {msg}", scenario.name)),
        other => BenchError::Scenario(format!("{}: {other}", scenario.name)),
    })?;
    let goal = match &scenario.goal {
        Some(g) => g.clone(),
        None => world.goal.clone().ok_or_else(|| {
            BenchError::Usage(format!(
                "scenario \"{}\" has no goal and the world carries none",
                scenario.name
            ))
        })?,
    };
    let start = resolve_start(scenario, &world, &goal)?;
    let position = start.position();
    if position.as_slice() == goal.as_slice() {
        return Err(BenchError::Usage(format!(
            "scenario \"{}\": start and goal coincide",
            scenario.name
        )));
    }

    let mut dwa = DwaConfig::new(config.clone());
    if let Some(r) = &scenario.config.dwa_resolution {
        dwa.resolution = r.clone();
    }
    if let Some(w) = scenario.config.dwa_goal_weight {
        dwa.goal_weight = w;
    }
    if let Some(w) = scenario.config.dwa_clearance_weight {
        dwa.clearance_weight = w;
    }
    if let Some(w) = scenario.config.dwa_velocity_weight {
        dwa.velocity_weight = w;
    }

    Ok(ResolvedScenario {
        world,
        start,
        goal,
        planner: planner_override.unwrap_or(scenario.planner),
        config,
        dwa,
    })
}

/// Artifacts and metrics of one completed run.
pub struct RunRecord {
    pub metrics: MetricsRecord,
    pub result: PlanResult<f64>,
    pub artifact_dir: Option<PathBuf>,
}

fn termination_str(result: &PlanResult<f64>) -> &'static str {
    match result.termination {
        TerminationReason::GoalReached => "goal-reached",
        TerminationReason::StepLimit => "step-limit",
        TerminationReason::ResampleExhausted => "resample-exhausted",
    }
}

/// Writes a file atomically (write to a temp sibling, then rename).
fn write_atomic(path: &Path, contents: &str) -> Result<(), BenchError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn trajectory_csv(result: &PlanResult<f64>, dt: f64) -> String {
    let mut out = String::new();
    let quad = matches!(result.states.first(), Some(RobotState::Quadrotor(_)));
    if quad {
        out.push_str("step,t,x,y,z,yaw,vx,vy,vz,yaw_rate,ax,ay,az,yaw_accel,u_vx,u_vy,u_vz,u_yaw_rate\n");
    } else {
        out.push_str("step,t,x,y,theta,v,omega,u_v,u_omega\n");
    }
    for (i, state) in result.states.iter().enumerate() {
        let t = i as f64 * dt;
        let control = match result.controls.get(i) {
            Some(c) => c
                .values
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
            None => ",".repeat(if quad { 3 } else { 1 }),
        };
        match state {
            RobotState::Unicycle(s) => {
                out.push_str(&format!(
                    "{i},{t},{},{},{},{},{},{control}\n",
                    s.x, s.y, s.theta, s.v, s.omega
                ));
            }
            RobotState::Quadrotor(s) => {
                out.push_str(&format!(
                    "{i},{t},{},{},{},{},{},{},{},{},{},{},{},{},{control}\n",
                    s.position[0],
                    s.position[1],
                    s.position[2],
                    s.yaw,
                    s.linear_velocity[0],
                    s.linear_velocity[1],
                    s.linear_velocity[2],
                    s.yaw_rate,
                    s.linear_acceleration[0],
                    s.linear_acceleration[1],
                    s.linear_acceleration[2],
                    s.yaw_acceleration
                ));
            }
        }
    }
    out
}

/// Runs a scenario end to end; when `out_dir` is given, writes
/// `world.json`, `trajectory.csv`, and `metrics.json` under
/// `<out_dir>/<name>__<planner>__seed<seed>/`.
pub fn run_scenario(
    scenario: &Scenario,
    planner_override: Option<PlannerKind>,
    seed_override: Option<u64>,
    base_dir: &Path,
    out_dir: Option<&Path>,
) -> Result<RunRecord, BenchError> {
    let resolved = resolve(scenario, planner_override, seed_override, base_dir)?;
    let result = match resolved.planner {
        PlannerKind::Bow => run(&resolved.start, &resolved.world, &resolved.goal, &resolved.config)
            .map_err(|e| BenchError::Scenario(format!("{}: {e}", scenario.name)))?,
        PlannerKind::Dwa => {
            run_dwa(&resolved.start, &resolved.world, &resolved.goal, &resolved.dwa)
                .map_err(|e| BenchError::Scenario(format!("{}: {e}", scenario.name)))?
        }
    };
    let metrics = compute_metrics(&result, result.total_planning_time(), resolved.config.dt);

    let artifact_dir = match out_dir {
        Some(root) => {
            let seed = resolved.config.seed;
            let dir = root.join(format!(
                "{}__{}__seed{}",
                scenario.name,
                resolved.planner.as_str(),
                seed
            ));
            fs::create_dir_all(&dir)?;
            write_atomic(
                &dir.join("world.json"),
                &bow_core::world::world_to_json(&resolved.world)?,
            )?;
            write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&result, resolved.config.dt))?;
            let v_max = match resolved.start {
                RobotState::Unicycle(_) => resolved.config.limits.axes[0].max,
                RobotState::Quadrotor(_) => {
                    let sq: f64 = resolved.config.limits.axes[..3]
                        .iter()
                        .map(|a| a.max * a.max)
                        .sum();
                    sq.sqrt()
                }
            };
            let doc = serde_json::json!({
                "scenario": scenario.name,
                "planner": resolved.planner.as_str(),
                "seed": seed,
                "termination": termination_str(&result),
                "metrics": metrics,
                "v_max": v_max,
                "dt": resolved.config.dt,
                "distance_query": resolved.world.distance_query_kind(),
                "definitions": {
                    "avg_jerk": "signed mean of the second finite difference of linear speed, divided by dt^2",
                    "timing_scope": "wall-clock of planning computation only; control application and file I/O are excluded",
                },
            });
            write_atomic(&dir.join("metrics.json"), &serde_json::to_string_pretty(&doc)?)?;
            Some(dir)
        }
        None => None,
    };

    Ok(RunRecord { metrics, result, artifact_dir })
}

/// Regenerates `plot.svg` inside a result directory from its saved world
/// and trajectory.
pub fn plot_result_dir(dir: &Path) -> Result<PathBuf, BenchError> {
    let world: World<f64> = load_world(dir.join("world.json"))?;
    let metrics_text = fs::read_to_string(dir.join("metrics.json"))?;
    let metrics: serde_json::Value = serde_json::from_str(&metrics_text)
        .map_err(|e| BenchError::Usage(format!("invalid metrics.json: {e}")))?;
    let v_max = metrics
        .get("v_max")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| BenchError::Usage("metrics.json missing v_max".into()))?;

    let csv = fs::read_to_string(dir.join("trajectory.csv"))?;
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::Usage("empty trajectory.csv".into()))?;
    let quad = header.starts_with("step,t,x,y,z");
    let mut samples = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<f64, BenchError> {
            fields
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| BenchError::Usage(format!("bad trajectory row: {line}")))
        };
        if quad {
            let (x, y, z) = (parse(2)?, parse(3)?, parse(4)?);
            let (vx, vy, vz) = (parse(6)?, parse(7)?, parse(8)?);
            samples.push(PlotSample {
                position: vec![x, y, z],
                speed: (vx * vx + vy * vy + vz * vz).sqrt(),
            });
        } else {
            samples.push(PlotSample { position: vec![parse(2)?, parse(3)?], speed: parse(5)?.abs() });
        }
    }
    let path = dir.join("plot.svg");
    emit_plot(&world, &samples, v_max, &path)?;
    Ok(path)
}
