//! Receding-horizon motion planning by constrained Bayesian optimization
//! over a dynamic window of reachable velocities, with a classic
//! dynamic-window grid-search baseline.
//!
//! Each planning cycle draws a handful of control samples from the window of
//! velocities reachable under the acceleration limits, evaluates the
//! cost-to-go and per-obstacle safety constraints along fixed-control RK4
//! rollouts, fits one Gaussian-process surrogate per quantity, and picks the
//! next command by maximizing constrained expected improvement. The chosen
//! command is held for a fixed number of steps, then the cycle repeats until
//! the goal radius is reached.
//!
//! The numeric core is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the aliases at the crate root fix the common `f64`
//! instantiation.

pub mod acquisition;
pub mod dwa;
pub mod geometry;
pub mod gp;
pub mod halton;
pub mod kinematics;
pub mod normal;
pub mod planner;
pub mod scalar;
pub mod world;

pub use scalar::Real;

/// `f64` instantiations of the main types.
pub type UnicycleState = kinematics::UnicycleState<f64>;
pub type QuadrotorState = kinematics::QuadrotorState<f64>;
pub type RobotState = kinematics::RobotState<f64>;
pub type ControlInput = kinematics::ControlInput<f64>;
pub type ControlWindow = kinematics::ControlWindow<f64>;
pub type KinodynamicLimits = kinematics::KinodynamicLimits<f64>;
pub type MotionModel = kinematics::MotionModel<f64>;
pub type Obstacle = world::Obstacle<f64>;
pub type World = world::World<f64>;
pub type SafetyConfig = world::SafetyConfig<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type PlannerConfig = planner::PlannerConfig<f64>;
pub type PlanResult = planner::PlanResult<f64>;
pub type DwaConfig = dwa::DwaConfig<f64>;
