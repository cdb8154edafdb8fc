//! Classic dynamic-window grid-search baseline.
//!
//! Every cell of a fixed grid over the reachable-velocity window is rolled
//! out and scored; colliding rollouts are discarded. The goal term reuses
//! the same cost-to-go as the CBO planner so sample-efficiency comparisons
//! are like for like.

use std::time::Instant;

use crate::kinematics::{dynamic_window, rollout, ControlInput};
use crate::planner::{
    run_with, PlanResult, PlanStep, PlannerConfig, PlannerError, StepDiagnostics,
};
use crate::scalar::{lit, Real};
use crate::world::World;
use crate::kinematics::RobotState;

#[derive(Clone, Debug)]
pub struct DwaConfig<T = f64> {
    pub base: PlannerConfig<T>,
    /// Grid resolution per control axis.
    pub resolution: Vec<usize>,
    pub goal_weight: T,
    pub clearance_weight: T,
    pub velocity_weight: T,
}

impl<T: Real> DwaConfig<T> {
    pub fn new(base: PlannerConfig<T>) -> Self {
        let axes = base.limits.control_dim();
        DwaConfig {
            base,
            resolution: vec![20; axes],
            goal_weight: T::one(),
            clearance_weight: lit(0.2),
            velocity_weight: lit(0.1),
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        self.base.validate()?;
        if self.resolution.len() != self.base.limits.control_dim() {
            return Err(PlannerError::InvalidConfig(
                "grid resolution must cover every control axis".into(),
            ));
        }
        if self.resolution.iter().any(|r| *r < 2) {
            return Err(PlannerError::InvalidConfig(
                "grid resolution must be at least 2 per axis".into(),
            ));
        }
        if self.goal_weight < T::zero()
            || self.clearance_weight < T::zero()
            || self.velocity_weight < T::zero()
        {
            return Err(PlannerError::InvalidConfig("weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        self.resolution.iter().product()
    }
}

fn command_speed<T: Real>(state: &RobotState<T>, u: &[T]) -> T {
    match state {
        RobotState::Unicycle(_) => u[0].abs(),
        RobotState::Quadrotor(_) => (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt(),
    }
}

/// Exhaustive grid search over the dynamic window. The evaluation count in
/// the diagnostics is always the full grid size.
pub fn dwa_plan_step<T: Real>(
    state: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &DwaConfig<T>,
) -> Result<PlanStep<T>, PlannerError> {
    cfg.validate()?;
    let started = Instant::now();
    let base = &cfg.base;
    let model = base.model_for(state);
    let window = dynamic_window(state, &base.limits, base.effective_tau_w())?;
    let dim = window.dim();
    let r_safe = base.safety.r_safe();

    let mut best: Option<(T, Vec<T>)> = None;
    let mut indices = vec![0usize; dim];
    let total = cfg.grid_size();

    for _ in 0..total {
        let u: Vec<T> = (0..dim)
            .map(|d| {
                let steps = cfg.resolution[d] - 1;
                window.lower[d]
                    + window.width(d) * lit::<T>(indices[d] as f64) / lit::<T>(steps as f64)
            })
            .collect();
        let control = ControlInput::new(u.clone());
        let trajectory = rollout(&model, state, &control, base.dt, base.horizon_steps + 1)?;

        // Minimum clearance over the predicted states; negative means the
        // rollout collides and the cell is discarded.
        let mut min_distance = T::infinity();
        for s in &trajectory[1..] {
            let position = s.position();
            if let Some((d, _)) = world.min_signed_distance(position.as_slice())? {
                min_distance = min_distance.min(d);
            }
        }
        let feasible = world.obstacles.is_empty() || min_distance >= r_safe;
        if feasible {
            let mut goal_cost = T::zero();
            for s in &trajectory[1..] {
                goal_cost += s.position().distance_to(goal);
            }
            goal_cost += trajectory[trajectory.len() - 1].position().distance_to(goal);
            let clearance = if world.obstacles.is_empty() { T::zero() } else { min_distance };
            let score = -cfg.goal_weight * goal_cost
                + cfg.clearance_weight * clearance
                + cfg.velocity_weight * command_speed(state, &u);
            let better = match &best {
                None => true,
                Some((s, b)) => score > *s || (score == *s && u < *b),
            };
            if better {
                best = Some((score, u));
            }
        }

        // Lexicographic grid iteration.
        for d in (0..dim).rev() {
            indices[d] += 1;
            if indices[d] < cfg.resolution[d] {
                break;
            }
            indices[d] = 0;
        }
    }

    match best {
        Some((_, u)) => {
            let control = ControlInput::new(u);
            let predicted = rollout(&model, state, &control, base.dt, base.horizon_steps)?;
            Ok(PlanStep {
                control: control.clone(),
                predicted: predicted.clone(),
                diagnostics: StepDiagnostics {
                    objective_evaluations: total,
                    resample_rounds: 0,
                    duration: started.elapsed(),
                    chosen: control,
                    predicted,
                    predicted_feasible: true,
                    fallback_stop: false,
                    gp_train_size_max: 0,
                },
            })
        }
        None => {
            // Every cell collides: report the safest stop.
            let stop = window.safest_stop();
            let predicted = rollout(&model, state, &stop, base.dt, base.horizon_steps)?;
            let report =
                world.validate_trajectory(&predicted[..=base.apply_steps], &base.safety)?;
            Ok(PlanStep {
                control: stop.clone(),
                predicted: predicted.clone(),
                diagnostics: StepDiagnostics {
                    objective_evaluations: total,
                    resample_rounds: 0,
                    duration: started.elapsed(),
                    chosen: stop,
                    predicted,
                    predicted_feasible: report.feasible,
                    fallback_stop: true,
                    gp_train_size_max: 0,
                },
            })
        }
    }
}

/// Receding-horizon loop driven by the grid search.
pub fn run_dwa<T: Real>(
    start: &RobotState<T>,
    world: &World<T>,
    goal: &[T],
    cfg: &DwaConfig<T>,
) -> Result<PlanResult<T>, PlannerError> {
    cfg.validate()?;
    run_with(start, world, goal, &cfg.base, |state, world, goal, _| {
        dwa_plan_step(state, world, goal, cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::kinematics::UnicycleState;
    use crate::world::Obstacle;

    fn open_world() -> World<f64> {
        World::new(2, Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]), vec![]).unwrap()
    }

    #[test]
    fn obstacle_free_prefers_fast_forward() {
        let cfg = DwaConfig::new(PlannerConfig::unicycle_defaults());
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let step = dwa_plan_step(&state, &open_world(), &[10.0, 0.0], &cfg).unwrap();
        let window_top = 0.35; // v reachable from rest
        assert!((step.control.values[0] - window_top).abs() < 1e-9);
        assert!(step.control.values[1].abs() < 0.05);
        assert_eq!(step.diagnostics.objective_evaluations, 400);
    }

    #[test]
    fn evaluation_count_is_grid_size() {
        let mut cfg = DwaConfig::new(PlannerConfig::unicycle_defaults());
        cfg.resolution = vec![11, 7];
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let step = dwa_plan_step(&state, &open_world(), &[10.0, 0.0], &cfg).unwrap();
        assert_eq!(step.diagnostics.objective_evaluations, 77);
    }

    #[test]
    fn grid_refinement_consistency() {
        // Refining 10 -> 40 per axis moves the argmax by at most one coarse
        // cell width per axis.
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![Obstacle::Circle { center: [2.0, 0.3], radius: 0.4 }],
        )
        .unwrap();
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let mut coarse = DwaConfig::new(PlannerConfig::unicycle_defaults());
        coarse.resolution = vec![10, 10];
        let mut fine = DwaConfig::new(PlannerConfig::unicycle_defaults());
        fine.resolution = vec![40, 40];
        let u_coarse = dwa_plan_step(&state, &world, &[10.0, 0.0], &coarse).unwrap().control;
        let u_fine = dwa_plan_step(&state, &world, &[10.0, 0.0], &fine).unwrap().control;
        let window = dynamic_window(&state, &coarse.base.limits, coarse.base.effective_tau_w())
            .unwrap();
        for d in 0..2 {
            let coarse_cell: f64 = window.width(d) / 9.0;
            assert!(
                (u_coarse.values[d] - u_fine.values[d]).abs() <= coarse_cell + 1e-12,
                "axis {d}: {} vs {}",
                u_coarse.values[d],
                u_fine.values[d]
            );
        }
    }

    #[test]
    fn never_selects_colliding_prefix() {
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![Obstacle::Box { min: vec![0.6, -3.0], max: vec![1.2, 3.0] }],
        )
        .unwrap();
        let cfg = DwaConfig::new(PlannerConfig::unicycle_defaults());
        let mut state = RobotState::Unicycle(UnicycleState::new(0.0, 0.0, 0.0, 0.9, 0.0));
        // March a few rounds; every applied prefix must stay clear.
        for _ in 0..5 {
            let step = dwa_plan_step(&state, &world, &[10.0, 0.0], &cfg).unwrap();
            if step.diagnostics.fallback_stop {
                break;
            }
            let report = world
                .validate_trajectory(&step.predicted[..=cfg.base.apply_steps], &cfg.base.safety)
                .unwrap();
            assert!(report.feasible);
            state = step.predicted[cfg.base.apply_steps];
        }
    }

    #[test]
    fn dwa_run_reaches_open_goal() {
        let cfg = DwaConfig::new(PlannerConfig::unicycle_defaults());
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let result = run_dwa(&state, &open_world(), &[5.0, 0.0], &cfg).unwrap();
        assert!(result.success);
    }

    #[test]
    fn dwa_is_deterministic() {
        let world = World::new(
            2,
            Aabb::new(vec![-20.0, -20.0], vec![20.0, 20.0]),
            vec![Obstacle::Circle { center: [2.5, 0.2], radius: 0.5 }],
        )
        .unwrap();
        let cfg = DwaConfig::new(PlannerConfig::unicycle_defaults());
        let state = RobotState::Unicycle(UnicycleState::at_pose(0.0, 0.0, 0.0));
        let a = run_dwa(&state, &world, &[6.0, 0.0], &cfg).unwrap();
        let b = run_dwa(&state, &world, &[6.0, 0.0], &cfg).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.controls, b.controls);
    }
}
