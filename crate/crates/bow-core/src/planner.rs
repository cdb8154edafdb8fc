//! Receding-horizon planning loop: sample controls in the dynamic window,
//! evaluate cost-to-go and safety constraints along fixed-control rollouts,
//! fit Gaussian-process surrogates, select the next command by maximizing
//! constrained expected improvement, validate, and apply it for a fixed
//! number of steps.

use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acquisition::{maximize_cei, recommend_exploit, AcquisitionContext};
use crate::geometry::dist;
use crate::gp::{gp_fit, Dataset, GpError, GpModel, KernelHyperparams};
use crate::halton::ScrambledHalton;
use crate::kinematics::{
    dynamic_window, rk4_step, rollout, ControlInput, ControlWindow, KinematicsError,
    KinodynamicLimits, MotionModel, RobotState,
};
use crate::scalar::{lit, Real};
use crate::world::{signed_distance, SafetyConfig, World, WorldError};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("start state is in collision with obstacle {obstacle}")]
    StartInCollision { obstacle: usize },
    #[error("{what} lies outside the workspace bounds")]
    OutOfBounds { what: &'static str },
    #[error("goal dimension {got} does not match workspace dimension {expected}")]
    GoalDimension { expected: usize, got: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// How per-obstacle constraint observations are aggregated over a rollout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintAggregation {
    /// Worst constraint value across every predicted state (default).
    RolloutMax,
    /// Constraint at the first predicted state only.
    FirstStep,
}

/// Surrogate hyperparameter policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HyperMode {
    /// Fixed window-scaled hyperparameters per fit (default): lengthscale is
    /// 0.3 of the window width per axis, signal variance is the target
    /// variance floored at 1e-6, noise is a 1e-8 jitter.
    FixedScaled,
    /// Bounded multi-start marginal-likelihood search per fit; offline use.
    MaximumLikelihood,
}

#[derive(Clone, Debug)]
pub struct PlannerConfig<T = f64> {
    /// Integration time step (s).
    pub dt: T,
    /// Prediction horizon in steps (the cost rollout extends one step
    /// further so the terminal state exists).
    pub horizon_steps: usize,
    /// Steps the chosen control is applied before replanning.
    pub apply_steps: usize,
    /// Goal radius (m); reaching it terminates planning with success.
    pub goal_radius: T,
    /// True objective/constraint evaluations per sampling round.
    pub sample_budget: usize,
    /// Low-discrepancy samples seeding each round.
    pub init_samples: usize,
    /// Additional sampling rounds after a failed validation.
    pub max_resample_rounds: usize,
    /// Candidate count for the acquisition maximizer.
    pub candidate_budget: usize,
    /// Reachability horizon of the dynamic window; defaults to
    /// `apply_steps * dt`.
    pub tau_w: Option<T>,
    /// Planning rounds before giving up.
    pub step_limit: usize,
    pub limits: KinodynamicLimits<T>,
    pub safety: SafetyConfig<T>,
    pub seed: u64,
    pub constraint_mode: ConstraintAggregation,
    pub hyper_mode: HyperMode,
    /// Velocity-tracking gain for the quadrotor model (1/s).
    pub tracking_gain: T,
}

impl<T: Real> PlannerConfig<T> {
    /// Default unicycle configuration: 0.1 s steps, 3 s horizon, commands
    /// held for 7 steps, 5 samples per round, speed in [0, 1] m/s with
    /// 0.5 m/s^2 acceleration, yaw rate within 0.6981 rad/s with
    /// 2.0472 rad/s^2 acceleration.
    pub fn unicycle_defaults() -> Self {
        PlannerConfig {
            dt: lit(0.1),
            horizon_steps: 30,
            apply_steps: 7,
            goal_radius: lit(0.2),
            sample_budget: 5,
            init_samples: 3,
            max_resample_rounds: 10,
            candidate_budget: 256,
            tau_w: None,
            step_limit: 5000,
            limits: KinodynamicLimits::unicycle(
                T::zero(),
                T::one(),
                lit(0.5),
                lit(0.6981),
                lit(2.0472),
            )
            .expect("default limits are valid"),
            safety: SafetyConfig::new(lit(0.2), lit(0.05)),
            seed: 0,
            constraint_mode: ConstraintAggregation::RolloutMax,
            hyper_mode: HyperMode::FixedScaled,
            tracking_gain: lit(5.0),
        }
    }

    /// Default quadrotor configuration: symmetric 1 m/s speed and 0.5 m/s^2
    /// acceleration limits per linear axis, yaw limits shared with the
    /// unicycle defaults.
    pub fn quadrotor_defaults() -> Self {
        let mut cfg = Self::unicycle_defaults();
        cfg.limits = KinodynamicLimits::quadrotor(
            [T::one(); 3],
            [lit(0.5); 3],
            lit(0.6981),
            lit(2.0472),
        )
        .expect("default limits are valid");
        cfg.goal_radius = lit(0.3);
        cfg.safety = SafetyConfig::new(lit(0.3), lit(0.05));
        cfg
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.dt > T::zero()) {
            return Err(PlannerError::InvalidConfig("dt must be positive".into()));
        }
        if self.horizon_steps == 0 {
            return Err(PlannerError::InvalidConfig("horizon must be at least one step".into()));
        }
        if self.apply_steps == 0 || self.apply_steps > self.horizon_steps {
            return Err(PlannerError::InvalidConfig(
                "apply_steps must satisfy 1 <= apply_steps <= horizon_steps".into(),
            ));
        }
        if self.init_samples == 0 || self.init_samples > self.sample_budget {
            return Err(PlannerError::InvalidConfig(
                "init_samples must satisfy 1 <= init_samples <= sample_budget".into(),
            ));
        }
        if !(self.goal_radius > T::zero()) {
            return Err(PlannerError::InvalidConfig("goal radius must be positive".into()));
        }
        if self.candidate_budget == 0 {
            return Err(PlannerError::InvalidConfig("candidate budget must be positive".into()));
        }
        if let Some(tau) = self.tau_w {
            if !(tau > T::zero()) {
                return Err(PlannerError::InvalidConfig("tau_w must be positive".into()));
            }
        }
        self.limits.validate()?;
        Ok(())
    }

    pub fn effective_tau_w(&self) -> T {
        self.tau_w
            .unwrap_or_else(|| lit::<T>(self.apply_steps as f64) * self.dt)
    }

    pub fn model_for(&self, state: &RobotState<T>) -> MotionModel<T> {
        MotionModel::for_state(state, &self.limits, self.tracking_gain)
    }
}

/// Per-round instrumentation.
#[derive(Clone, Debug)]
pub struct StepDiagnostics<T = f64> {
    /// True objective/constraint evaluations consumed by this round.
    pub objective_evaluations: usize,
    /// Resampling rounds used beyond the first.
    pub resample_rounds: usize,
    /// Wall-clock time of the planning computation.
    pub duration: Duration,
    /// Chosen command.
    pub chosen: ControlInput<T>,
    /// Full-horizon predicted trajectory under the chosen command.
    pub predicted: Vec<RobotState<T>>,
    /// Whether the applied prefix of the prediction passed validation.
    pub predicted_feasible: bool,
    /// Set when sampling was exhausted and the safest stop was returned.
    pub fallback_stop: bool,
    /// Largest GP training set fitted this round.
    pub gp_train_size_max: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    GoalReached,
    StepLimit,
    ResampleExhausted,
}

/// Executed trajectory with per-round diagnostics.
#[derive(Clone, Debug)]
pub struct PlanResult<T = f64> {
    /// Executed states, one per integration step, starting at the start state.
    pub states: Vec<RobotState<T>>,
    /// Applied control per integration step (`controls[i]` drives
    /// `states[i]` to `states[i + 1]`).
    pub controls: Vec<ControlInput<T>>,
    pub success: bool,
    pub steps: Vec<StepDiagnostics<T>>,
    pub termination: TerminationReason,
}

impl<T: Real> PlanResult<T> {
    pub fn executed_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn total_planning_time(&self) -> Duration {
        self.steps.iter().map(|s| s.duration).sum()
    }

    pub fn total_evaluations(&self) -> usize {
        self.steps.iter().map(|s| s.objective_evaluations).sum()
    }
}

/// Sum of goal distances along a fixed-control rollout plus a terminal goal
/// distance. The rollout runs one step past the horizon so the terminal
/// state exists; distances are on position coordinates only.
pub fn cost_to_go<T: Real>(
    state: &RobotState<T>,
    u: &ControlInput<T>,
    goal: &[T],
    cfg: &PlannerConfig<T>,
) -> Result<T, PlannerError> {
    let model = cfg.model_for(state);
    let trajectory = rollout(&model, state, u, cfg.dt, cfg.horizon_steps + 1)?;
    Ok(stage_cost_sum(&trajectory, goal))
}

fn stage_cost_sum<T: Real>(trajectory: &[RobotState<T>], goal: &[T]) -> T {
    let mut total = T::zero();
    for state in &trajectory[1..] {
        total += state.position().distance_to(goal);
    }
    // Terminal cost shares the stage functional form.
    total + trajectory[trajectory.len() - 1].position().distance_to(goal)
}

/// Evaluates one control: the cost-to-go objective and one constraint value
/// per obstacle, aggregated over the rollout per the configured mode.
pub fn evaluate_sample<T: Real>(
    state: &RobotState<T>,
    u: &ControlInput<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &PlannerConfig<T>,
) -> Result<(T, Vec<T>), PlannerError> {
    let model = cfg.model_for(state);
    let trajectory = rollout(&model, state, u, cfg.dt, cfg.horizon_steps + 1)?;
    let objective = stage_cost_sum(&trajectory, goal);
    let all: Vec<usize> = (0..world.obstacles.len()).collect();
    let constraints = constraint_vector(&trajectory, world, &all, cfg)?;
    Ok((objective, constraints))
}

fn constraint_vector<T: Real>(
    trajectory: &[RobotState<T>],
    world: &World<T>,
    obstacle_indices: &[usize],
    cfg: &PlannerConfig<T>,
) -> Result<Vec<T>, PlannerError> {
    let r_safe = cfg.safety.r_safe();
    let states: &[RobotState<T>] = match cfg.constraint_mode {
        ConstraintAggregation::RolloutMax => &trajectory[1..],
        ConstraintAggregation::FirstStep => &trajectory[1..2],
    };
    let mut values = Vec::with_capacity(obstacle_indices.len());
    for &k in obstacle_indices {
        let obstacle = &world.obstacles[k];
        let mut worst = T::neg_infinity();
        for state in states {
            let position = state.position();
            let c = r_safe - signed_distance(position.as_slice(), obstacle)?;
            worst = worst.max(c);
        }
        values.push(worst);
    }
    Ok(values)
}

/// One evaluated control sample.
#[derive(Clone, Debug)]
pub struct EvaluatedSample<T = f64> {
    pub control: ControlInput<T>,
    pub objective: T,
    /// One value per active constraint; non-positive means satisfied.
    pub constraints: Vec<T>,
}

impl<T: Real> EvaluatedSample<T> {
    pub fn feasible(&self) -> bool {
        self.constraints.iter().all(|c| *c <= T::zero())
    }
}

/// Outcome of one Bayesian-optimization sampling round over a window.
#[derive(Clone, Debug)]
pub struct BoRound<T = f64> {
    pub window: ControlWindow<T>,
    pub samples: Vec<EvaluatedSample<T>>,
    /// Continuous acquisition argmax recommended after the sample budget.
    pub recommended: ControlInput<T>,
    pub gp_train_size_max: usize,
}

impl<T: Real> BoRound<T> {
    /// Best feasible sample by objective, ties toward the lexicographically
    /// smallest control.
    pub fn best_feasible(&self) -> Option<&EvaluatedSample<T>> {
        self.samples
            .iter()
            .filter(|s| s.feasible())
            .min_by(|a, b| {
                a.objective
                    .partial_cmp(&b.objective)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| {
                        a.control
                            .partial_cmp(&b.control)
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
            })
    }
}

/// Lengthscale per axis as a fraction of the window width.
const LENGTHSCALE_WINDOW_FRACTION: f64 = 0.3;

fn window_hyperparams<T: Real>(window: &ControlWindow<T>, targets: &[T]) -> KernelHyperparams<T> {
    let n = lit::<T>(targets.len() as f64);
    let mean = targets.iter().fold(T::zero(), |a, &b| a + b) / n;
    let variance = targets
        .iter()
        .map(|&t| (t - mean) * (t - mean))
        .fold(T::zero(), |a, b| a + b)
        / n;
    let lengthscales = (0..window.dim())
        .map(|d| {
            let w = window.width(d);
            // Degenerate axes still need a positive lengthscale.
            if w > T::zero() {
                lit::<T>(LENGTHSCALE_WINDOW_FRACTION) * w
            } else {
                lit::<T>(1e-3)
            }
        })
        .collect();
    KernelHyperparams {
        signal_variance: variance.max(lit(1e-6)),
        lengthscales,
        noise_variance: lit(1e-8),
    }
}

fn fit_surrogate<T: Real>(
    window: &ControlWindow<T>,
    inputs: &[Vec<T>],
    targets: &[T],
    mode: HyperMode,
) -> Result<GpModel<T>, GpError> {
    let data = Dataset { inputs: inputs.to_vec(), targets: targets.to_vec() };
    let hyper = window_hyperparams(window, targets);
    match mode {
        HyperMode::FixedScaled => gp_fit(&data, &hyper),
        HyperMode::MaximumLikelihood => crate::gp::fit_ml2(&data, &hyper),
    }
}

/// Runs one sampling round: `init_samples` low-discrepancy evaluations, then
/// sequential acquisition-driven evaluations up to the sample budget, then a
/// final continuous recommendation from surrogates over all samples.
///
/// `active` selects which obstacles get constraint surrogates; evaluation
/// budget accounting covers true evaluations only.
pub fn bo_round<T: Real>(
    state: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    window: &ControlWindow<T>,
    active: &[usize],
    cfg: &PlannerConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<BoRound<T>, PlannerError> {
    let model = cfg.model_for(state);
    let dim = window.dim();
    let mut samples: Vec<EvaluatedSample<T>> = Vec::with_capacity(cfg.sample_budget);
    let mut gp_train_size_max = 0usize;

    let evaluate = |u: Vec<T>,
                    samples: &mut Vec<EvaluatedSample<T>>|
     -> Result<(), PlannerError> {
        let control = ControlInput::new(u);
        let trajectory = rollout(&model, state, &control, cfg.dt, cfg.horizon_steps + 1)?;
        let objective = stage_cost_sum(&trajectory, goal);
        let constraints = constraint_vector(&trajectory, world, active, cfg)?;
        samples.push(EvaluatedSample { control, objective, constraints });
        Ok(())
    };

    let init = ScrambledHalton::new(dim, rng.next_u64());
    for unit in init.take(cfg.init_samples.min(cfg.sample_budget)) {
        evaluate(window.lerp(&unit), &mut samples)?;
    }

    let fit_all = |samples: &[EvaluatedSample<T>]| -> Result<(GpModel<T>, Vec<GpModel<T>>), PlannerError> {
        let inputs: Vec<Vec<T>> = samples.iter().map(|s| s.control.values.clone()).collect();
        let objective_targets: Vec<T> = samples.iter().map(|s| s.objective).collect();
        let objective = fit_surrogate(window, &inputs, &objective_targets, cfg.hyper_mode)?;
        let mut constraint_models = Vec::with_capacity(active.len());
        for c in 0..active.len() {
            let targets: Vec<T> = samples.iter().map(|s| s.constraints[c]).collect();
            constraint_models.push(fit_surrogate(window, &inputs, &targets, cfg.hyper_mode)?);
        }
        Ok((objective, constraint_models))
    };

    let incumbent_of = |samples: &[EvaluatedSample<T>]| -> Option<T> {
        samples
            .iter()
            .filter(|s| s.feasible())
            .map(|s| s.objective)
            .fold(None, |best, v| Some(best.map_or(v, |b: T| b.min(v))))
    };

    while samples.len() < cfg.sample_budget {
        let (objective_model, constraint_models) = fit_all(&samples)?;
        gp_train_size_max = gp_train_size_max.max(objective_model.train_size());
        let ctx = AcquisitionContext {
            objective: &objective_model,
            constraints: &constraint_models,
            incumbent: incumbent_of(&samples),
            window,
        };
        let next = maximize_cei(&ctx, cfg.candidate_budget, rng.next_u64())?;
        evaluate(next, &mut samples)?;
    }

    // The applied control exploits the final surrogates; exploration already
    // happened through the evaluations above.
    let (objective_model, constraint_models) = fit_all(&samples)?;
    gp_train_size_max = gp_train_size_max.max(objective_model.train_size());
    let ctx = AcquisitionContext {
        objective: &objective_model,
        constraints: &constraint_models,
        incumbent: incumbent_of(&samples),
        window,
    };
    let recommended =
        ControlInput::new(recommend_exploit(&ctx, cfg.candidate_budget, rng.next_u64())?);

    Ok(BoRound { window: window.clone(), samples, recommended, gp_train_size_max })
}

/// Obstacles that any rollout from `state` could possibly reach within the
/// cost horizon. Constraint surrogates are only fitted for these; distant
/// obstacles keep constraint values strictly negative over every sample, so
/// their feasibility factors are identically one.
fn reachable_obstacles<T: Real>(
    state: &RobotState<T>,
    world: &World<T>,
    cfg: &PlannerConfig<T>,
) -> Result<Vec<usize>, PlannerError> {
    let speed_bound = match state {
        RobotState::Unicycle(_) => {
            let axis = &cfg.limits.axes[0];
            axis.min.abs().max(axis.max.abs())
        }
        RobotState::Quadrotor(_) => {
            let mut sq = T::zero();
            for axis in cfg.limits.axes.iter().take(3) {
                let m = axis.min.abs().max(axis.max.abs());
                sq += m * m;
            }
            sq.sqrt()
        }
    };
    let horizon_time = lit::<T>((cfg.horizon_steps + 1) as f64) * cfg.dt;
    let reach = speed_bound * horizon_time + cfg.safety.r_safe() + lit::<T>(1e-9);
    let position = state.position();
    let mut active = Vec::new();
    for (k, obstacle) in world.obstacles.iter().enumerate() {
        if signed_distance(position.as_slice(), obstacle)? <= reach {
            active.push(k);
        }
    }
    Ok(active)
}

/// Output of one planning round.
pub struct PlanStep<T = f64> {
    pub control: ControlInput<T>,
    pub predicted: Vec<RobotState<T>>,
    pub diagnostics: StepDiagnostics<T>,
}

/// One full planning round: window, sampling rounds with validation and
/// fallbacks, safest-stop on exhaustion (flagged in the diagnostics rather
/// than reported as an error).
pub fn plan_step<T: Real>(
    state: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &PlannerConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<PlanStep<T>, PlannerError> {
    let started = Instant::now();
    let model = cfg.model_for(state);
    let window = dynamic_window(state, &cfg.limits, cfg.effective_tau_w())?;
    let active = reachable_obstacles(state, world, cfg)?;

    let mut evaluations = 0usize;
    let mut gp_train_size_max = 0usize;

    // Prefix feasibility gates application; the recommendation is
    // additionally held to full-horizon feasibility, the same standard the
    // sampled constraint observations use, so the loop cannot steer into
    // states where every reachable rollout collides.
    let validated = |u: &ControlInput<T>| -> Result<(Vec<RobotState<T>>, bool, bool), PlannerError> {
        let predicted = rollout(&model, state, u, cfg.dt, cfg.horizon_steps)?;
        let prefix = &predicted[..=cfg.apply_steps.min(predicted.len() - 1)];
        let prefix_ok = world.validate_trajectory(prefix, &cfg.safety)?.feasible;
        let horizon_ok = if prefix_ok {
            world
                .validate_trajectory(&predicted[cfg.apply_steps..], &cfg.safety)?
                .feasible
        } else {
            false
        };
        Ok((predicted, prefix_ok, horizon_ok))
    };

    for round in 0..=cfg.max_resample_rounds {
        let bo = bo_round(state, world, goal, &window, &active, cfg, rng)?;
        evaluations += bo.samples.len();
        gp_train_size_max = gp_train_size_max.max(bo.gp_train_size_max);

        let (predicted, _, horizon_ok) = validated(&bo.recommended)?;
        if horizon_ok {
            return Ok(PlanStep {
                control: bo.recommended.clone(),
                predicted: predicted.clone(),
                diagnostics: StepDiagnostics {
                    objective_evaluations: evaluations,
                    resample_rounds: round,
                    duration: started.elapsed(),
                    chosen: bo.recommended,
                    predicted,
                    predicted_feasible: true,
                    fallback_stop: false,
                    gp_train_size_max,
                },
            });
        }

        // The surrogate argmax failed validation: fall back to the best
        // observed feasible sample whose applied prefix checks out.
        let mut feasible_samples: Vec<&EvaluatedSample<T>> =
            bo.samples.iter().filter(|s| s.feasible()).collect();
        feasible_samples.sort_by(|a, b| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    a.control
                        .partial_cmp(&b.control)
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });
        for sample in feasible_samples {
            let (predicted, prefix_ok, _) = validated(&sample.control)?;
            if prefix_ok {
                return Ok(PlanStep {
                    control: sample.control.clone(),
                    predicted: predicted.clone(),
                    diagnostics: StepDiagnostics {
                        objective_evaluations: evaluations,
                        resample_rounds: round,
                        duration: started.elapsed(),
                        chosen: sample.control.clone(),
                        predicted,
                        predicted_feasible: true,
                        fallback_stop: false,
                        gp_train_size_max,
                    },
                });
            }
        }
    }

    // Sampling exhausted: report the safest stopping command.
    let stop = window.safest_stop();
    let (predicted, prefix_ok, _) = validated(&stop)?;
    Ok(PlanStep {
        control: stop.clone(),
        predicted: predicted.clone(),
        diagnostics: StepDiagnostics {
            objective_evaluations: evaluations,
            resample_rounds: cfg.max_resample_rounds,
            duration: started.elapsed(),
            chosen: stop,
            predicted,
            predicted_feasible: prefix_ok,
            fallback_stop: true,
            gp_train_size_max,
        },
    })
}

/// Re-integrates a control sequence from a start state; used to check that
/// executed trajectories are reproducible from their controls.
pub fn replay<T: Real>(
    start: &RobotState<T>,
    controls: &[ControlInput<T>],
    cfg: &PlannerConfig<T>,
) -> Result<Vec<RobotState<T>>, PlannerError> {
    let model = cfg.model_for(start);
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*start);
    let mut current = *start;
    for control in controls {
        current = rk4_step(&model, &current, control, cfg.dt)?;
        states.push(current);
    }
    Ok(states)
}

fn check_start<T: Real>(
    start: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &PlannerConfig<T>,
) -> Result<(), PlannerError> {
    cfg.validate()?;
    if goal.len() != world.dimension {
        return Err(PlannerError::GoalDimension { expected: world.dimension, got: goal.len() });
    }
    let position = start.position();
    if position.dim() != world.dimension {
        return Err(PlannerError::GoalDimension {
            expected: world.dimension,
            got: position.dim(),
        });
    }
    if !world.bounds.contains(position.as_slice()) {
        return Err(PlannerError::OutOfBounds { what: "start" });
    }
    if !world.bounds.contains(goal) {
        return Err(PlannerError::OutOfBounds { what: "goal" });
    }
    let r_safe = cfg.safety.r_safe();
    for (k, obstacle) in world.obstacles.iter().enumerate() {
        if signed_distance(position.as_slice(), obstacle)? < r_safe {
            return Err(PlannerError::StartInCollision { obstacle: k });
        }
    }
    Ok(())
}

/// Runs the receding-horizon loop to the goal radius, a step limit, or
/// sampling exhaustion. The executed trajectory only ever contains states
/// whose applied prefix passed validation.
pub fn run<T: Real>(
    start: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &PlannerConfig<T>,
) -> Result<PlanResult<T>, PlannerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cfg = cfg.clone();
    run_with(start, world, goal, &cfg, |state, world, goal, cfg| {
        plan_step(state, world, goal, cfg, &mut rng)
    })
}

/// Receding-horizon loop over an arbitrary per-round planner; shared by the
/// CBO planner and the grid-search baseline.
pub fn run_with<T, F>(
    start: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &PlannerConfig<T>,
    mut step_fn: F,
) -> Result<PlanResult<T>, PlannerError>
where
    T: Real,
    F: FnMut(&RobotState<T>, &World<T>, &[T], &PlannerConfig<T>) -> Result<PlanStep<T>, PlannerError>,
{
    check_start(start, world, goal, cfg)?;
    let mut states = vec![*start];
    let mut controls: Vec<ControlInput<T>> = Vec::new();
    let mut diagnostics: Vec<StepDiagnostics<T>> = Vec::new();

    // Consecutive exhausted rounds tolerated while braking to a halt before
    // the loop declares the problem stuck.
    const MAX_CONSECUTIVE_STOPS: usize = 3;

    let mut current = *start;
    let mut rounds = 0usize;
    let mut consecutive_stops = 0usize;
    loop {
        let goal_distance = dist(current.position().as_slice(), goal);
        if goal_distance <= cfg.goal_radius {
            return Ok(PlanResult {
                states,
                controls,
                success: true,
                steps: diagnostics,
                termination: TerminationReason::GoalReached,
            });
        }
        if rounds >= cfg.step_limit {
            return Ok(PlanResult {
                states,
                controls,
                success: false,
                steps: diagnostics,
                termination: TerminationReason::StepLimit,
            });
        }

        let step = step_fn(&current, world, goal, cfg)?;
        let fallback = step.diagnostics.fallback_stop;
        let prefix_safe = step.diagnostics.predicted_feasible;
        diagnostics.push(step.diagnostics);
        if fallback {
            consecutive_stops += 1;
            // Keep braking while the stop command's prefix stays safe;
            // otherwise stop without advancing so the executed trajectory
            // stays violation-free.
            if !prefix_safe || consecutive_stops > MAX_CONSECUTIVE_STOPS {
                return Ok(PlanResult {
                    states,
                    controls,
                    success: false,
                    steps: diagnostics,
                    termination: TerminationReason::ResampleExhausted,
                });
            }
        } else {
            consecutive_stops = 0;
        }

        // Apply the command for the validated prefix. The predicted states
        // come from the same integrator calls, so pushing them is identical
        // to re-integrating.
        for i in 1..=cfg.apply_steps {
            states.push(step.predicted[i]);
            controls.push(step.control.clone());
        }
        current = *states.last().expect("states never empty");
        rounds += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::UnicycleState;
    use crate::world::Obstacle;
    use crate::geometry::Aabb;

    fn open_world() -> World<f64> {
        World::new(2, Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]), vec![]).unwrap()
    }

    fn cfg() -> PlannerConfig<f64> {
        PlannerConfig::unicycle_defaults()
    }

    #[test]
    fn cost_to_go_hand_rollout() {
        // Unit speed along +x toward (1, 0) with dt = 0.1 and a 2-step
        // horizon: stages 0.9 + 0.8 + 0.7 plus terminal 0.7.
        let mut c = cfg();
        c.horizon_steps = 2;
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let u = ControlInput::unicycle(1.0, 0.0);
        let cost = cost_to_go(&state, &u, &[1.0, 0.0], &c).unwrap();
        assert!((cost - 3.1).abs() < 1e-9, "cost {cost}");
    }

    #[test]
    fn cost_to_go_zero_at_goal() {
        let state = RobotState::Unicycle(UnicycleState::at_pose(2.0, -1.0, 0.3));
        let u = ControlInput::unicycle(0.0, 0.0);
        let cost = cost_to_go(&state, &u, &[2.0, -1.0], &cfg()).unwrap();
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn cost_to_go_deterministic() {
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.2));
        let u = ControlInput::unicycle(0.7, -0.1);
        let a = cost_to_go(&state, &u, &[3.0, 1.0], &cfg()).unwrap();
        let b = cost_to_go(&state, &u, &[3.0, 1.0], &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_sample_empty_world() {
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let u = ControlInput::unicycle(0.5, 0.0);
        let (objective, constraints) =
            evaluate_sample(&state, &u, &open_world(), &[5.0, 0.0], &cfg()).unwrap();
        assert!(constraints.is_empty());
        assert!((objective - cost_to_go(&state, &u, &[5.0, 0.0], &cfg()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_sample_grazing_boundary() {
        // Straight rollout along +x; a circle is offset so the closest
        // approach is exactly r_safe.
        let c = cfg();
        let r_safe = c.safety.r_safe();
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![Obstacle::Circle { center: [1.5, 0.5 + r_safe], radius: 0.5 }],
        )
        .unwrap();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let u = ControlInput::unicycle(1.0, 0.0);
        let (_, constraints) = evaluate_sample(&state, &u, &world, &[5.0, 0.0], &c).unwrap();
        assert_eq!(constraints.len(), 1);
        assert!(constraints[0].abs() < 1e-9, "grazing constraint {}", constraints[0]);
    }

    #[test]
    fn evaluate_sample_matches_brute_force() {
        let c = cfg();
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![
                Obstacle::Circle { center: [1.0, 0.4], radius: 0.3 },
                Obstacle::Box { min: vec![2.0, -1.0], max: vec![2.5, 1.0] },
                Obstacle::Polygon { vertices: vec![[0.5, -2.0], [1.5, -2.0], [1.0, -1.0]] },
            ],
        )
        .unwrap();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.1));
        let u = ControlInput::unicycle(0.8, -0.2);
        let (_, constraints) = evaluate_sample(&state, &u, &world, &[5.0, 0.0], &c).unwrap();

        let model = c.model_for(&state);
        let traj = rollout(&model, &state, &u, c.dt, c.horizon_steps + 1).unwrap();
        for (k, obstacle) in world.obstacles.iter().enumerate() {
            let mut worst = f64::NEG_INFINITY;
            for s in &traj[1..] {
                let p = s.position();
                let v = c.safety.r_safe() - signed_distance(p.as_slice(), obstacle).unwrap();
                worst = worst.max(v);
            }
            assert!((constraints[k] - worst).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_step_respects_sample_budget() {
        let c = cfg();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let step = plan_step(&state, &open_world(), &[10.0, 0.0], &c, &mut rng).unwrap();
        assert!(step.diagnostics.objective_evaluations <= c.sample_budget);
        assert_eq!(step.diagnostics.resample_rounds, 0);
        assert!(step.diagnostics.gp_train_size_max <= c.sample_budget);
    }

    #[test]
    fn run_immediate_success_at_goal() {
        let c = cfg();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let result = run(&state, &open_world(), &[0.1, 0.0], &c).unwrap();
        assert!(result.success);
        assert_eq!(result.termination, TerminationReason::GoalReached);
        assert_eq!(result.states.len(), 1);
        assert!(result.controls.is_empty());
    }

    #[test]
    fn run_rejects_colliding_start() {
        let c = cfg();
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![Obstacle::Circle { center: [0.0, 0.0], radius: 0.5 }],
        )
        .unwrap();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let err = run(&state, &world, &[5.0, 0.0], &c).unwrap_err();
        assert!(matches!(err, PlannerError::StartInCollision { obstacle: 0 }));
    }

    #[test]
    fn run_rejects_out_of_bounds() {
        let c = cfg();
        let state = RobotState::Unicycle(UnicycleState::at_pose(-30.0, 0.0, 0.0));
        assert!(matches!(
            run(&state, &open_world(), &[5.0, 0.0], &c),
            Err(PlannerError::OutOfBounds { what: "start" })
        ));
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        assert!(matches!(
            run(&state, &open_world(), &[50.0, 0.0], &c),
            Err(PlannerError::OutOfBounds { what: "goal" })
        ));
    }

    #[test]
    fn run_reaches_goal_in_open_space() {
        let mut c = cfg();
        c.seed = 3;
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let result = run(&state, &open_world(), &[6.0, 0.0], &c).unwrap();
        assert!(result.success, "termination {:?}", result.termination);
        let last = result.states.last().unwrap().position();
        assert!(dist(last.as_slice(), &[6.0, 0.0]) <= c.goal_radius + 1e-12);
        // Applied controls arrive in blocks of apply_steps.
        assert_eq!(result.executed_steps() % c.apply_steps, 0);
    }

    #[test]
    fn replay_reproduces_executed_trajectory() {
        let mut c = cfg();
        c.seed = 9;
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let result = run(&state, &open_world(), &[4.0, 2.0], &c).unwrap();
        let replayed = replay(&state, &result.controls, &c).unwrap();
        assert_eq!(replayed, result.states);
    }

    #[test]
    fn first_step_mode_uses_single_state() {
        let mut c = cfg();
        c.constraint_mode = ConstraintAggregation::FirstStep;
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![Obstacle::Circle { center: [2.0, 0.0], radius: 0.4 }],
        )
        .unwrap();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let u = ControlInput::unicycle(1.0, 0.0);
        let (_, constraints) = evaluate_sample(&state, &u, &world, &[5.0, 0.0], &c).unwrap();
        // Only the first predicted state counts: x = 0.1, so d = 1.5.
        let expected = c.safety.r_safe() - 1.5;
        assert!((constraints[0] - expected).abs() < 1e-9);
        // RolloutMax sees the close approach instead.
        c.constraint_mode = ConstraintAggregation::RolloutMax;
        let (_, constraints) = evaluate_sample(&state, &u, &world, &[5.0, 0.0], &c).unwrap();
        assert!(constraints[0] > expected);
    }

    #[test]
    fn ml2_hyper_mode_plans() {
        let mut c = cfg();
        c.hyper_mode = HyperMode::MaximumLikelihood;
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let step = plan_step(&state, &open_world(), &[8.0, 0.0], &c, &mut rng).unwrap();
        assert!(!step.diagnostics.fallback_stop);
        assert!(step.diagnostics.objective_evaluations <= c.sample_budget);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.apply_steps = 40;
        assert!(matches!(c.validate(), Err(PlannerError::InvalidConfig(_))));
        let mut c = cfg();
        c.init_samples = 9;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.dt = 0.0;
        assert!(c.validate().is_err());
    }
}
