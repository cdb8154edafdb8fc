//! Obstacle representation, signed distance queries, safety constraints,
//! trajectory validation, and procedural environment generation.
//!
//! Obstacles are closed convex primitives; non-convex shapes are modeled as
//! unions of convex members. Distances are signed: negative inside an
//! obstacle, so constraint values keep growing with penetration depth.

mod bvh;
mod generate;
mod io;

pub use bvh::Bvh;
pub use generate::{generate_box_field, generate_bugtrap, generate_poisson_forest};
pub use io::{load_world, save_world, world_from_json, world_to_json};

use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dist, Aabb};
use crate::kinematics::RobotState;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("dimension mismatch: {context} is {got}-dimensional, expected {expected}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("unsupported obstacle type \"{0}\"")]
    UnsupportedShape(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("environment generation failed: {0}")]
    GenerationFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Number of obstacles above which distance queries go through the BVH
/// instead of a linear scan.
const BVH_THRESHOLD: usize = 16;

/// A single convex obstacle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Obstacle<T = f64> {
    Circle { center: [T; 2], radius: T },
    /// Axis-aligned box in 2-D or 3-D, depending on corner length.
    Box { min: Vec<T>, max: Vec<T> },
    /// Convex polygon with counter-clockwise vertices.
    Polygon { vertices: Vec<[T; 2]> },
    Sphere { center: [T; 3], radius: T },
}

impl<T: Real> Obstacle<T> {
    pub fn dimension(&self) -> usize {
        match self {
            Obstacle::Circle { .. } | Obstacle::Polygon { .. } => 2,
            Obstacle::Sphere { .. } => 3,
            Obstacle::Box { min, .. } => min.len(),
        }
    }

    /// Tight axis-aligned bounding box.
    pub fn aabb(&self) -> Aabb<T> {
        match self {
            Obstacle::Circle { center, radius } => Aabb::new(
                vec![center[0] - *radius, center[1] - *radius],
                vec![center[0] + *radius, center[1] + *radius],
            ),
            Obstacle::Sphere { center, radius } => Aabb::new(
                center.iter().map(|&c| c - *radius).collect(),
                center.iter().map(|&c| c + *radius).collect(),
            ),
            Obstacle::Box { min, max } => Aabb::new(min.clone(), max.clone()),
            Obstacle::Polygon { vertices } => {
                let mut min = [T::infinity(); 2];
                let mut max = [T::neg_infinity(); 2];
                for v in vertices {
                    for i in 0..2 {
                        min[i] = min[i].min(v[i]);
                        max[i] = max[i].max(v[i]);
                    }
                }
                Aabb::new(min.to_vec(), max.to_vec())
            }
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let finite = |vals: &[T]| vals.iter().all(|v| v.is_finite());
        match self {
            Obstacle::Circle { center, radius } => {
                if !finite(center) || !radius.is_finite() {
                    return Err(WorldError::InvalidObstacle("non-finite circle".into()));
                }
                if *radius <= T::zero() {
                    return Err(WorldError::InvalidObstacle("circle radius must be positive".into()));
                }
            }
            Obstacle::Sphere { center, radius } => {
                if !finite(center) || !radius.is_finite() {
                    return Err(WorldError::InvalidObstacle("non-finite sphere".into()));
                }
                if *radius <= T::zero() {
                    return Err(WorldError::InvalidObstacle("sphere radius must be positive".into()));
                }
            }
            Obstacle::Box { min, max } => {
                if min.len() != max.len() || !(min.len() == 2 || min.len() == 3) {
                    return Err(WorldError::InvalidObstacle(
                        "box corners must both be 2-D or 3-D".into(),
                    ));
                }
                if !finite(min) || !finite(max) {
                    return Err(WorldError::InvalidObstacle("non-finite box".into()));
                }
                if min.iter().zip(max).any(|(lo, hi)| lo >= hi) {
                    return Err(WorldError::InvalidObstacle(
                        "box min must be strictly below max componentwise".into(),
                    ));
                }
            }
            Obstacle::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(WorldError::InvalidObstacle(
                        "polygon needs at least 3 vertices".into(),
                    ));
                }
                if vertices.iter().any(|v| !finite(v)) {
                    return Err(WorldError::InvalidObstacle("non-finite polygon".into()));
                }
                let n = vertices.len();
                let mut area = T::zero();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if cross < T::zero() {
                        return Err(WorldError::InvalidObstacle(
                            "polygon must be convex with counter-clockwise vertices".into(),
                        ));
                    }
                    area += a[0] * b[1] - b[0] * a[1];
                }
                if area <= T::zero() {
                    return Err(WorldError::InvalidObstacle("polygon is degenerate".into()));
                }
            }
        }
        Ok(())
    }
}

/// Euclidean distance from a point to an obstacle surface, negative inside.
pub fn signed_distance<T: Real>(point: &[T], obstacle: &Obstacle<T>) -> Result<T, WorldError> {
    let expected = obstacle.dimension();
    if point.len() != expected {
        return Err(WorldError::DimensionMismatch {
            context: "query point",
            expected,
            got: point.len(),
        });
    }
    Ok(match obstacle {
        Obstacle::Circle { center, radius } => dist(point, center) - *radius,
        Obstacle::Sphere { center, radius } => dist(point, center) - *radius,
        Obstacle::Box { min, max } => {
            Aabb { min: min.clone(), max: max.clone() }.signed_distance(point)
        }
        Obstacle::Polygon { vertices } => polygon_signed_distance(point, vertices),
    })
}

fn polygon_signed_distance<T: Real>(point: &[T], vertices: &[[T; 2]]) -> T {
    let (px, py) = (point[0], point[1]);
    let n = vertices.len();
    let mut boundary = T::infinity();
    let mut inside = true;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        // Distance to the segment a-b.
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let (qx, qy) = (px - a[0], py - a[1]);
        let len_sq = ex * ex + ey * ey;
        let t = if len_sq > T::zero() {
            ((qx * ex + qy * ey) / len_sq).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        let (dx, dy) = (qx - t * ex, qy - t * ey);
        boundary = boundary.min((dx * dx + dy * dy).sqrt());
        // CCW convex polygon: inside iff left of every edge.
        if ex * qy - ey * qx < T::zero() {
            inside = false;
        }
    }
    if inside {
        -boundary
    } else {
        boundary
    }
}

/// Robot footprint and clearance margin, folded into a single safety radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig<T = f64> {
    /// Robot footprint disc/sphere radius (m).
    pub r_robot: T,
    /// Extra buffer beyond the footprint (m).
    pub margin: T,
}

impl<T: Real> SafetyConfig<T> {
    pub fn new(r_robot: T, margin: T) -> Self {
        SafetyConfig { r_robot, margin }
    }

    pub fn r_safe(&self) -> T {
        self.r_robot + self.margin
    }
}

/// Collision constraint value `r_safe - d(state, obstacle)`; non-positive
/// means the constraint is satisfied.
pub fn constraint_value<T: Real>(
    state: &RobotState<T>,
    obstacle: &Obstacle<T>,
    safety: &SafetyConfig<T>,
) -> Result<T, WorldError> {
    let position = state.position();
    Ok(safety.r_safe() - signed_distance(position.as_slice(), obstacle)?)
}

/// Same constraint evaluated on a raw position.
pub fn constraint_value_at<T: Real>(
    point: &[T],
    obstacle: &Obstacle<T>,
    safety: &SafetyConfig<T>,
) -> Result<T, WorldError> {
    Ok(safety.r_safe() - signed_distance(point, obstacle)?)
}

/// Result of checking a trajectory against a world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationReport {
    pub feasible: bool,
    /// First `(step index, obstacle index)` violating the safety constraint,
    /// in lexicographic order.
    pub first_violation: Option<(usize, usize)>,
}

/// Workspace with an obstacle set and optional start/goal annotations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct World<T = f64> {
    pub dimension: usize,
    pub bounds: Aabb<T>,
    pub obstacles: Vec<Obstacle<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Vec<T>>,
    #[serde(skip)]
    index: OnceCell<Bvh<T>>,
}

impl<T: Real> PartialEq for World<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.bounds == other.bounds
            && self.obstacles == other.obstacles
            && self.start == other.start
            && self.goal == other.goal
    }
}

impl<T: Real> World<T> {
    pub fn new(
        dimension: usize,
        bounds: Aabb<T>,
        obstacles: Vec<Obstacle<T>>,
    ) -> Result<Self, WorldError> {
        let world = World { dimension, bounds, obstacles, start: None, goal: None, index: OnceCell::new() };
        world.validate()?;
        Ok(world)
    }

    pub fn with_endpoints(mut self, start: Vec<T>, goal: Vec<T>) -> Result<Self, WorldError> {
        for (name, p) in [("start", &start), ("goal", &goal)] {
            if p.len() != self.dimension {
                return Err(WorldError::DimensionMismatch {
                    context: if name == "start" { "start" } else { "goal" },
                    expected: self.dimension,
                    got: p.len(),
                });
            }
        }
        self.start = Some(start);
        self.goal = Some(goal);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.dimension != 2 && self.dimension != 3 {
            return Err(WorldError::InvalidWorld(format!(
                "dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        if !self.bounds.is_valid() || self.bounds.dim() != self.dimension {
            return Err(WorldError::InvalidWorld("bounds box is degenerate or mismatched".into()));
        }
        for (i, obstacle) in self.obstacles.iter().enumerate() {
            obstacle.validate()?;
            if obstacle.dimension() != self.dimension {
                return Err(WorldError::DimensionMismatch {
                    context: "obstacle",
                    expected: self.dimension,
                    got: obstacle.dimension(),
                });
            }
            let _ = i;
        }
        for (context, p) in [("start", &self.start), ("goal", &self.goal)] {
            if let Some(p) = p {
                if p.len() != self.dimension {
                    return Err(WorldError::DimensionMismatch {
                        context: if context == "start" { "start" } else { "goal" },
                        expected: self.dimension,
                        got: p.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacles.len()
    }

    fn bvh(&self) -> Option<&Bvh<T>> {
        if self.obstacles.len() < BVH_THRESHOLD {
            return None;
        }
        Some(self.index.get_or_init(|| Bvh::build(&self.obstacles)))
    }

    /// Which distance-query path this world uses; small obstacle sets scan
    /// linearly, larger ones go through the BVH.
    pub fn distance_query_kind(&self) -> &'static str {
        if self.obstacles.len() < BVH_THRESHOLD {
            "linear"
        } else {
            "bvh"
        }
    }

    /// Minimum signed distance over all obstacles and the index achieving it.
    /// Returns `None` for an empty obstacle set.
    pub fn min_signed_distance(&self, point: &[T]) -> Result<Option<(T, usize)>, WorldError> {
        if point.len() != self.dimension {
            return Err(WorldError::DimensionMismatch {
                context: "query point",
                expected: self.dimension,
                got: point.len(),
            });
        }
        if self.obstacles.is_empty() {
            return Ok(None);
        }
        if let Some(bvh) = self.bvh() {
            return Ok(Some(bvh.nearest(point, &self.obstacles)));
        }
        let mut best = (T::infinity(), 0);
        for (i, obstacle) in self.obstacles.iter().enumerate() {
            let d = signed_distance(point, obstacle)?;
            if d < best.0 {
                best = (d, i);
            }
        }
        Ok(Some(best))
    }

    /// Checks every state against every obstacle; reports the first
    /// violation in `(step, obstacle)` lexicographic order.
    pub fn validate_trajectory(
        &self,
        trajectory: &[RobotState<T>],
        safety: &SafetyConfig<T>,
    ) -> Result<ValidationReport, WorldError> {
        let r_safe = safety.r_safe();
        for (step, state) in trajectory.iter().enumerate() {
            let position = state.position();
            let hit = match self.min_signed_distance(position.as_slice())? {
                Some((d, _)) if d < r_safe => true,
                _ => false,
            };
            if hit {
                // Scan for the lowest violating obstacle index at this step.
                for (k, obstacle) in self.obstacles.iter().enumerate() {
                    if signed_distance(position.as_slice(), obstacle)? < r_safe {
                        return Ok(ValidationReport {
                            feasible: false,
                            first_violation: Some((step, k)),
                        });
                    }
                }
            }
        }
        Ok(ValidationReport { feasible: true, first_violation: None })
    }
}
