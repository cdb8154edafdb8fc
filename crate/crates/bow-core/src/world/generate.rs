//! Seeded procedural environment generators.
//!
//! All generators are deterministic for a given `(seed, parameters)` pair;
//! randomness comes from a ChaCha stream seeded explicitly, never from
//! ambient entropy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::geometry::Aabb;
use crate::scalar::{lit, Real};

use super::{signed_distance, Obstacle, SafetyConfig, World, WorldError};

const MAX_ATTEMPTS_PER_OBSTACLE: usize = 1000;

fn clear_of<T: Real>(obstacle: &Obstacle<T>, point: &[T], clearance: T) -> bool {
    signed_distance(point, obstacle).map(|d| d >= clearance).unwrap_or(false)
}

/// Field of axis-aligned square obstacles placed by rejection sampling.
///
/// Start and goal keep at least `clearance` distance from every obstacle.
/// Callers should pass a clearance no smaller than their safety radius.
pub fn generate_box_field<T: Real>(
    seed: u64,
    bounds: &Aabb<T>,
    count: usize,
    size_range: (T, T),
    start: &[T],
    goal: &[T],
    clearance: T,
) -> Result<World<T>, WorldError> {
    if bounds.dim() != 2 {
        return Err(WorldError::GenerationFailed("box field generator is 2-D".into()));
    }
    if !(size_range.0 > T::zero() && size_range.1 >= size_range.0) {
        return Err(WorldError::GenerationFailed("invalid obstacle size range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles = Vec::with_capacity(count);
    let (lo, hi) = (size_range.0.to_f64().unwrap(), size_range.1.to_f64().unwrap());
    for i in 0..count {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS_PER_OBSTACLE {
            let size = lit::<T>(rng.random_range(lo..=hi));
            let half = size / lit::<T>(2.0);
            let mut center = [T::zero(); 2];
            for d in 0..2 {
                let min = (bounds.min[d] + half).to_f64().unwrap();
                let max = (bounds.max[d] - half).to_f64().unwrap();
                if !(max > min) {
                    return Err(WorldError::GenerationFailed(
                        "obstacle size exceeds workspace".into(),
                    ));
                }
                center[d] = lit::<T>(rng.random_range(min..=max));
            }
            let candidate = Obstacle::Box {
                min: vec![center[0] - half, center[1] - half],
                max: vec![center[0] + half, center[1] + half],
            };
            if clear_of(&candidate, start, clearance) && clear_of(&candidate, goal, clearance) {
                obstacles.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(WorldError::GenerationFailed(format!(
                "could not place obstacle {i} after {MAX_ATTEMPTS_PER_OBSTACLE} attempts"
            )));
        }
    }
    World::new(2, bounds.clone(), obstacles)?.with_endpoints(start.to_vec(), goal.to_vec())
}

/// Homogeneous Poisson forest of circular obstacles at a target density
/// (obstacles per square meter), with clearance carve-outs around the start
/// and goal.
pub fn generate_poisson_forest<T: Real>(
    seed: u64,
    bounds: &Aabb<T>,
    density: T,
    radius_range: (T, T),
    start: &[T],
    goal: &[T],
    clearance: T,
) -> Result<World<T>, WorldError> {
    if bounds.dim() != 2 {
        return Err(WorldError::GenerationFailed("poisson forest generator is 2-D".into()));
    }
    if !(density > T::zero()) {
        return Err(WorldError::GenerationFailed("density must be positive".into()));
    }
    if !(radius_range.0 > T::zero() && radius_range.1 >= radius_range.0) {
        return Err(WorldError::GenerationFailed("invalid radius range".into()));
    }
    let area = (bounds.max[0] - bounds.min[0]) * (bounds.max[1] - bounds.min[1]);
    let lambda = (density * area).to_f64().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_count = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| WorldError::GenerationFailed(format!("poisson sampling: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let (r_lo, r_hi) = (radius_range.0.to_f64().unwrap(), radius_range.1.to_f64().unwrap());
    let mut obstacles = Vec::with_capacity(draw_count);
    for _ in 0..draw_count {
        let x = rng.random_range(bounds.min[0].to_f64().unwrap()..=bounds.max[0].to_f64().unwrap());
        let y = rng.random_range(bounds.min[1].to_f64().unwrap()..=bounds.max[1].to_f64().unwrap());
        let radius = lit::<T>(rng.random_range(r_lo..=r_hi));
        let candidate = Obstacle::Circle { center: [lit::<T>(x), lit::<T>(y)], radius };
        // Thinning: drop trees that would crowd the endpoints.
        if clear_of(&candidate, start, clearance) && clear_of(&candidate, goal, clearance) {
            obstacles.push(candidate);
        }
    }
    World::new(2, bounds.clone(), obstacles)?.with_endpoints(start.to_vec(), goal.to_vec())
}

/// C-shaped enclosure of box obstacles with a single opening on the +x side,
/// centered on `start`; the goal must lie outside the trap.
///
/// The opening must exceed twice the safety radius so a feasible corridor
/// through it exists.
pub fn generate_bugtrap<T: Real>(
    opening_width: T,
    wall_thickness: T,
    trap_size: T,
    start: &[T],
    goal: &[T],
    safety: &SafetyConfig<T>,
) -> Result<World<T>, WorldError> {
    if start.len() != 2 || goal.len() != 2 {
        return Err(WorldError::GenerationFailed("bugtrap generator is 2-D".into()));
    }
    let two = lit::<T>(2.0);
    if !(wall_thickness > T::zero()) {
        return Err(WorldError::GenerationFailed("wall thickness must be positive".into()));
    }
    if opening_width <= two * safety.r_safe() {
        return Err(WorldError::GenerationFailed(format!(
            "opening width {} does not admit the safety radius {}",
            opening_width,
            safety.r_safe()
        )));
    }
    let half = trap_size / two;
    let half_open = opening_width / two;
    // Side walls must still meet the corners after leaving the opening, and
    // the cavity must hold the robot with clearance.
    if half - wall_thickness <= half_open {
        return Err(WorldError::GenerationFailed(
            "trap too small for the requested opening".into(),
        ));
    }
    if half - wall_thickness <= safety.r_safe() {
        return Err(WorldError::GenerationFailed("cavity smaller than the safety radius".into()));
    }
    let (cx, cy) = (start[0], start[1]);
    let walls = vec![
        // Left (closed side).
        Obstacle::Box {
            min: vec![cx - half, cy - half],
            max: vec![cx - half + wall_thickness, cy + half],
        },
        // Bottom.
        Obstacle::Box {
            min: vec![cx - half, cy - half],
            max: vec![cx + half, cy - half + wall_thickness],
        },
        // Top.
        Obstacle::Box {
            min: vec![cx - half, cy + half - wall_thickness],
            max: vec![cx + half, cy + half],
        },
        // Right, below the opening.
        Obstacle::Box {
            min: vec![cx + half - wall_thickness, cy - half],
            max: vec![cx + half, cy - half_open],
        },
        // Right, above the opening.
        Obstacle::Box {
            min: vec![cx + half - wall_thickness, cy + half_open],
            max: vec![cx + half, cy + half],
        },
    ];
    let goal_inside =
        goal[0] > cx - half && goal[0] < cx + half && goal[1] > cy - half && goal[1] < cy + half;
    if goal_inside {
        return Err(WorldError::GenerationFailed("goal must lie outside the trap".into()));
    }
    // Workspace comfortably containing trap, start, and goal.
    let pad = trap_size / two;
    let min = vec![
        (cx - half).min(goal[0]).min(start[0]) - pad,
        (cy - half).min(goal[1]).min(start[1]) - pad,
    ];
    let max = vec![
        (cx + half).max(goal[0]).max(start[0]) + pad,
        (cy + half).max(goal[1]).max(start[1]) + pad,
    ];
    World::new(2, Aabb::new(min, max), walls)?.with_endpoints(start.to_vec(), goal.to_vec())
}
