//! Robot state and control representations, motion-model derivatives, RK4
//! integration, and dynamic-window computation.
//!
//! Two kinematic models are supported: a planar unicycle with a 5-D state
//! `(x, y, theta, v, omega)` driven by velocity commands `(v_c, omega_c)`,
//! and a 12-D quadrotor (position, yaw, linear velocity, yaw rate, linear
//! acceleration, yaw acceleration) driven by velocity commands on four axes.
//! Commands are held piecewise-constant over a rollout; acceleration limits
//! act through the reachable-velocity window, not inside the rollout.

use thiserror::Error;

use crate::geometry::Point;
use crate::scalar::{half, lit, two, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("control dimension {got} does not match model dimension {expected}")]
    ControlDimension { expected: usize, got: usize },
    #[error("invalid kinodynamic limits: {0}")]
    InvalidLimits(String),
    #[error("rollout needs at least one step")]
    EmptyRollout,
}

/// Wraps an angle to the half-open interval `(-pi, pi]`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let tau = two::<T>() * T::PI();
    let mut a = theta % tau;
    if a > T::PI() {
        a -= tau;
    } else if a <= -T::PI() {
        a += tau;
    }
    a
}

/// Planar unicycle state `(x, y, theta, v, omega)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct UnicycleState<T = f64> {
    /// World-frame position (m).
    pub x: T,
    pub y: T,
    /// Heading (rad), kept in `(-pi, pi]`.
    pub theta: T,
    /// Linear velocity (m/s).
    pub v: T,
    /// Angular velocity (rad/s).
    pub omega: T,
}

impl<T: Real> UnicycleState<T> {
    pub fn new(x: T, y: T, theta: T, v: T, omega: T) -> Self {
        UnicycleState { x, y, theta: wrap_angle(theta), v, omega }
    }

    /// State at rest at a pose.
    pub fn at_pose(x: T, y: T, theta: T) -> Self {
        Self::new(x, y, theta, T::zero(), T::zero())
    }
}

/// Quadrotor state: position, yaw, their rates, and the accelerations
/// applied by the velocity-tracking dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct QuadrotorState<T = f64> {
    pub position: [T; 3],
    pub yaw: T,
    pub linear_velocity: [T; 3],
    pub yaw_rate: T,
    pub linear_acceleration: [T; 3],
    pub yaw_acceleration: T,
}

impl<T: Real> QuadrotorState<T> {
    /// State at rest at a position with a given yaw.
    pub fn at_position(position: [T; 3], yaw: T) -> Self {
        QuadrotorState { position, yaw: wrap_angle(yaw), ..Default::default() }
    }
}

/// Robot state tagged with its kinematic model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RobotState<T = f64> {
    Unicycle(UnicycleState<T>),
    Quadrotor(QuadrotorState<T>),
}

impl<T: Real> RobotState<T> {
    pub fn position(&self) -> Point<T> {
        match self {
            RobotState::Unicycle(s) => Point::new2(s.x, s.y),
            RobotState::Quadrotor(s) => Point::new3(s.position[0], s.position[1], s.position[2]),
        }
    }

    /// Magnitude of the linear velocity.
    pub fn speed(&self) -> T {
        match self {
            RobotState::Unicycle(s) => s.v.abs(),
            RobotState::Quadrotor(s) => {
                let v = s.linear_velocity;
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            }
        }
    }

    /// Number of command axes for this model.
    pub fn control_dim(&self) -> usize {
        match self {
            RobotState::Unicycle(_) => 2,
            RobotState::Quadrotor(_) => 4,
        }
    }

    /// Current value on each command axis; the dynamic window is centered here.
    pub fn command_values(&self) -> Vec<T> {
        match self {
            RobotState::Unicycle(s) => vec![s.v, s.omega],
            RobotState::Quadrotor(s) => vec![
                s.linear_velocity[0],
                s.linear_velocity[1],
                s.linear_velocity[2],
                s.yaw_rate,
            ],
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            RobotState::Unicycle(s) => {
                [s.x, s.y, s.theta, s.v, s.omega].iter().all(|c| c.is_finite())
            }
            RobotState::Quadrotor(s) => {
                s.position.iter().all(|c| c.is_finite())
                    && s.linear_velocity.iter().all(|c| c.is_finite())
                    && s.linear_acceleration.iter().all(|c| c.is_finite())
                    && s.yaw.is_finite()
                    && s.yaw_rate.is_finite()
                    && s.yaw_acceleration.is_finite()
            }
        }
    }
}

/// Command vector: `(v_c, omega_c)` for the unicycle, linear velocities plus
/// yaw rate for the quadrotor.
#[derive(Clone, Debug, PartialEq, PartialOrd, Default)]
pub struct ControlInput<T = f64> {
    pub values: Vec<T>,
}

impl<T: Real> ControlInput<T> {
    pub fn new(values: Vec<T>) -> Self {
        ControlInput { values }
    }

    pub fn unicycle(v: T, omega: T) -> Self {
        ControlInput { values: vec![v, omega] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|c| c.is_finite())
    }

    fn check_dim(&self, expected: usize) -> Result<(), KinematicsError> {
        if self.values.len() != expected {
            return Err(KinematicsError::ControlDimension { expected, got: self.values.len() });
        }
        if !self.is_finite() {
            return Err(KinematicsError::NonFinite("control input"));
        }
        Ok(())
    }
}

/// Bounds and acceleration limit for one command axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisLimit<T = f64> {
    pub min: T,
    pub max: T,
    pub max_accel: T,
}

/// Kinodynamic limits as one `AxisLimit` per command axis.
#[derive(Clone, Debug, PartialEq)]
pub struct KinodynamicLimits<T = f64> {
    pub axes: Vec<AxisLimit<T>>,
}

impl<T: Real> KinodynamicLimits<T> {
    /// Unicycle limits: `v in [v_min, v_max]` with acceleration `a_max`,
    /// `|omega| <= omega_max` with acceleration `alpha_max`.
    pub fn unicycle(
        v_min: T,
        v_max: T,
        a_max: T,
        omega_max: T,
        alpha_max: T,
    ) -> Result<Self, KinematicsError> {
        if omega_max <= T::zero() {
            return Err(KinematicsError::InvalidLimits(
                "omega_max must be positive".into(),
            ));
        }
        let limits = KinodynamicLimits {
            axes: vec![
                AxisLimit { min: v_min, max: v_max, max_accel: a_max },
                AxisLimit { min: -omega_max, max: omega_max, max_accel: alpha_max },
            ],
        };
        limits.validate()?;
        Ok(limits)
    }

    /// Quadrotor limits: symmetric per-axis speed/acceleration bounds on the
    /// three linear axes plus the yaw-rate axis.
    pub fn quadrotor(
        speed_max: [T; 3],
        accel_max: [T; 3],
        yaw_rate_max: T,
        yaw_accel_max: T,
    ) -> Result<Self, KinematicsError> {
        let mut axes: Vec<AxisLimit<T>> = (0..3)
            .map(|i| AxisLimit { min: -speed_max[i], max: speed_max[i], max_accel: accel_max[i] })
            .collect();
        axes.push(AxisLimit { min: -yaw_rate_max, max: yaw_rate_max, max_accel: yaw_accel_max });
        let limits = KinodynamicLimits { axes };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (i, axis) in self.axes.iter().enumerate() {
            if !(axis.min.is_finite() && axis.max.is_finite() && axis.max_accel.is_finite()) {
                return Err(KinematicsError::NonFinite("kinodynamic limits"));
            }
            if axis.min > axis.max {
                return Err(KinematicsError::InvalidLimits(format!(
                    "axis {i}: min {} > max {}",
                    axis.min, axis.max
                )));
            }
            if axis.max_accel <= T::zero() {
                return Err(KinematicsError::InvalidLimits(format!(
                    "axis {i}: acceleration limit must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn control_dim(&self) -> usize {
        self.axes.len()
    }

    /// Clamps a command componentwise into the global bounds.
    pub fn clamp(&self, u: &ControlInput<T>) -> ControlInput<T> {
        ControlInput::new(
            u.values
                .iter()
                .zip(&self.axes)
                .map(|(&c, a)| c.max(a.min).min(a.max))
                .collect(),
        )
    }
}

/// Box of commands reachable within the window horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlWindow<T = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> ControlWindow<T> {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains(&self, u: &[T]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .enumerate()
                .all(|(i, c)| self.lower[i] <= *c && *c <= self.upper[i])
    }

    /// Maps unit-cube coordinates into the window.
    pub fn lerp(&self, unit: &[f64]) -> Vec<T> {
        debug_assert_eq!(unit.len(), self.dim());
        unit.iter()
            .enumerate()
            .map(|(i, &t)| self.lower[i] + lit::<T>(t) * self.width(i))
            .collect()
    }

    pub fn clamp(&self, u: &mut [T]) {
        for (i, c) in u.iter_mut().enumerate() {
            *c = c.max(self.lower[i]).min(self.upper[i]);
        }
    }

    /// Command inside the window with the smallest magnitude per axis; the
    /// safest stopping command when planning fails.
    pub fn safest_stop(&self) -> ControlInput<T> {
        ControlInput::new(
            (0..self.dim())
                .map(|i| T::zero().max(self.lower[i]).min(self.upper[i]))
                .collect(),
        )
    }
}

/// Velocity-tracking parameters for the quadrotor model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrotorDynamics<T = f64> {
    /// First-order tracking gain (1/s) toward the commanded velocities.
    pub tracking_gain: T,
    /// Acceleration saturation per command axis (3 linear + yaw).
    pub accel_limits: [T; 4],
}

impl<T: Real> QuadrotorDynamics<T> {
    pub fn from_limits(limits: &KinodynamicLimits<T>, tracking_gain: T) -> Self {
        let mut accel_limits = [T::infinity(); 4];
        for (slot, axis) in accel_limits.iter_mut().zip(&limits.axes) {
            *slot = axis.max_accel;
        }
        QuadrotorDynamics { tracking_gain, accel_limits }
    }
}

impl<T: Real> Default for QuadrotorDynamics<T> {
    fn default() -> Self {
        QuadrotorDynamics { tracking_gain: lit(5.0), accel_limits: [T::infinity(); 4] }
    }
}

/// Kinematic model tag, carrying model parameters where needed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotionModel<T = f64> {
    Unicycle,
    Quadrotor(QuadrotorDynamics<T>),
}

impl<T: Real> MotionModel<T> {
    /// Model matching a state's tag, with quadrotor dynamics derived from the
    /// acceleration limits.
    pub fn for_state(
        state: &RobotState<T>,
        limits: &KinodynamicLimits<T>,
        tracking_gain: T,
    ) -> Self {
        match state {
            RobotState::Unicycle(_) => MotionModel::Unicycle,
            RobotState::Quadrotor(_) => {
                MotionModel::Quadrotor(QuadrotorDynamics::from_limits(limits, tracking_gain))
            }
        }
    }
}

/// Time derivative of the unicycle state under a velocity command.
///
/// Velocity slots are zero: commands are held piecewise-constant, so the
/// planner moves them only through the dynamic window.
pub fn unicycle_derivative<T: Real>(
    state: &UnicycleState<T>,
    u: &ControlInput<T>,
) -> Result<[T; 5], KinematicsError> {
    u.check_dim(2)?;
    if ![state.x, state.y, state.theta, state.v, state.omega]
        .iter()
        .all(|c| c.is_finite())
    {
        return Err(KinematicsError::NonFinite("unicycle state"));
    }
    let (v_c, omega_c) = (u.values[0], u.values[1]);
    Ok([
        v_c * state.theta.cos(),
        v_c * state.theta.sin(),
        omega_c,
        T::zero(),
        T::zero(),
    ])
}

/// Time derivative of the quadrotor state under a velocity command.
///
/// Velocity derivatives are first-order tracking toward the command,
/// saturated at the per-axis acceleration limits. The last four slots mirror
/// those applied accelerations; they are bookkeeping, not integrated state.
pub fn quadrotor_derivative<T: Real>(
    state: &QuadrotorState<T>,
    u: &ControlInput<T>,
    dynamics: &QuadrotorDynamics<T>,
) -> Result<[T; 12], KinematicsError> {
    u.check_dim(4)?;
    if !RobotState::Quadrotor(*state).is_finite() {
        return Err(KinematicsError::NonFinite("quadrotor state"));
    }
    let mut deriv = [T::zero(); 12];
    deriv[0] = state.linear_velocity[0];
    deriv[1] = state.linear_velocity[1];
    deriv[2] = state.linear_velocity[2];
    deriv[3] = state.yaw_rate;
    let current = [
        state.linear_velocity[0],
        state.linear_velocity[1],
        state.linear_velocity[2],
        state.yaw_rate,
    ];
    for axis in 0..4 {
        let a_max = dynamics.accel_limits[axis];
        let raw = dynamics.tracking_gain * (u.values[axis] - current[axis]);
        let accel = raw.max(-a_max).min(a_max);
        deriv[4 + axis] = accel;
        deriv[8 + axis] = accel;
    }
    Ok(deriv)
}

/// One classical fourth-order Runge-Kutta step with the command held
/// constant; angles are re-wrapped afterward.
///
/// For the unicycle only the pose integrates; the velocity slots record the
/// command attained at the end of the step. For the quadrotor the eight
/// dynamic slots integrate and the acceleration slots record the tracking
/// acceleration at the new velocities.
pub fn rk4_step<T: Real>(
    model: &MotionModel<T>,
    state: &RobotState<T>,
    u: &ControlInput<T>,
    dt: T,
) -> Result<RobotState<T>, KinematicsError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(KinematicsError::InvalidTimeStep(dt.to_f64().unwrap_or(f64::NAN)));
    }
    match (model, state) {
        (MotionModel::Unicycle, RobotState::Unicycle(s)) => {
            let add = |s: &UnicycleState<T>, k: &[T; 5], h: T| UnicycleState {
                x: s.x + h * k[0],
                y: s.y + h * k[1],
                theta: s.theta + h * k[2],
                v: s.v,
                omega: s.omega,
            };
            let k1 = unicycle_derivative(s, u)?;
            let k2 = unicycle_derivative(&add(s, &k1, dt * half()), u)?;
            let k3 = unicycle_derivative(&add(s, &k2, dt * half()), u)?;
            let k4 = unicycle_derivative(&add(s, &k3, dt), u)?;
            let sixth = dt / lit::<T>(6.0);
            let combine = |i: usize| k1[i] + two::<T>() * k2[i] + two::<T>() * k3[i] + k4[i];
            Ok(RobotState::Unicycle(UnicycleState {
                x: s.x + sixth * combine(0),
                y: s.y + sixth * combine(1),
                theta: wrap_angle(s.theta + sixth * combine(2)),
                v: u.values[0],
                omega: u.values[1],
            }))
        }
        (MotionModel::Quadrotor(dynamics), RobotState::Quadrotor(s)) => {
            let add = |s: &QuadrotorState<T>, k: &[T; 12], h: T| QuadrotorState {
                position: [
                    s.position[0] + h * k[0],
                    s.position[1] + h * k[1],
                    s.position[2] + h * k[2],
                ],
                yaw: s.yaw + h * k[3],
                linear_velocity: [
                    s.linear_velocity[0] + h * k[4],
                    s.linear_velocity[1] + h * k[5],
                    s.linear_velocity[2] + h * k[6],
                ],
                yaw_rate: s.yaw_rate + h * k[7],
                linear_acceleration: s.linear_acceleration,
                yaw_acceleration: s.yaw_acceleration,
            };
            let k1 = quadrotor_derivative(s, u, dynamics)?;
            let k2 = quadrotor_derivative(&add(s, &k1, dt * half()), u, dynamics)?;
            let k3 = quadrotor_derivative(&add(s, &k2, dt * half()), u, dynamics)?;
            let k4 = quadrotor_derivative(&add(s, &k3, dt), u, dynamics)?;
            let sixth = dt / lit::<T>(6.0);
            let combine = |i: usize| k1[i] + two::<T>() * k2[i] + two::<T>() * k3[i] + k4[i];
            let mut next = QuadrotorState {
                position: [
                    s.position[0] + sixth * combine(0),
                    s.position[1] + sixth * combine(1),
                    s.position[2] + sixth * combine(2),
                ],
                yaw: wrap_angle(s.yaw + sixth * combine(3)),
                linear_velocity: [
                    s.linear_velocity[0] + sixth * combine(4),
                    s.linear_velocity[1] + sixth * combine(5),
                    s.linear_velocity[2] + sixth * combine(6),
                ],
                yaw_rate: s.yaw_rate + sixth * combine(7),
                linear_acceleration: [T::zero(); 3],
                yaw_acceleration: T::zero(),
            };
            // Record the tracking acceleration at the post-step velocities.
            let post = quadrotor_derivative(&next, u, dynamics)?;
            next.linear_acceleration = [post[4], post[5], post[6]];
            next.yaw_acceleration = post[7];
            Ok(RobotState::Quadrotor(next))
        }
        _ => Err(KinematicsError::ControlDimension {
            expected: state.control_dim(),
            got: u.dim(),
        }),
    }
}

/// Integrates a fixed command for `steps` RK4 steps; element 0 is the input
/// state, so the result has `steps + 1` elements.
pub fn rollout<T: Real>(
    model: &MotionModel<T>,
    state: &RobotState<T>,
    u: &ControlInput<T>,
    dt: T,
    steps: usize,
) -> Result<Vec<RobotState<T>>, KinematicsError> {
    if steps == 0 {
        return Err(KinematicsError::EmptyRollout);
    }
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(*state);
    let mut current = *state;
    for _ in 0..steps {
        current = rk4_step(model, &current, u, dt)?;
        trajectory.push(current);
    }
    Ok(trajectory)
}

/// Box of commands reachable from the current command values within `tau_w`
/// seconds under the acceleration limits, intersected with the global
/// bounds. Always non-empty.
pub fn dynamic_window<T: Real>(
    state: &RobotState<T>,
    limits: &KinodynamicLimits<T>,
    tau_w: T,
) -> Result<ControlWindow<T>, KinematicsError> {
    if !(tau_w > T::zero()) || !tau_w.is_finite() {
        return Err(KinematicsError::InvalidTimeStep(tau_w.to_f64().unwrap_or(f64::NAN)));
    }
    limits.validate()?;
    let current = state.command_values();
    if current.len() != limits.axes.len() {
        return Err(KinematicsError::ControlDimension {
            expected: current.len(),
            got: limits.axes.len(),
        });
    }
    let mut lower = Vec::with_capacity(current.len());
    let mut upper = Vec::with_capacity(current.len());
    for (c, axis) in current.iter().zip(&limits.axes) {
        // Clamping the center first keeps the window non-empty even if the
        // current command sits marginally outside the global bounds.
        let center = c.max(axis.min).min(axis.max);
        let reach = axis.max_accel * tau_w;
        lower.push((center - reach).max(axis.min));
        upper.push((center + reach).min(axis.max));
    }
    Ok(ControlWindow { lower, upper })
}
