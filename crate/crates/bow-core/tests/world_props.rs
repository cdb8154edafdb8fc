//! Property tests for distance queries, trajectory validation, and the
//! environment generators.

use bow_core::geometry::{dist, Aabb};
use bow_core::kinematics::{rollout, ControlInput, MotionModel, RobotState, UnicycleState};
use bow_core::world::{
    generate_box_field, generate_bugtrap, generate_poisson_forest, signed_distance, Obstacle,
    SafetyConfig,
};
use proptest::prelude::*;

fn arbitrary_obstacle() -> impl Strategy<Value = Obstacle<f64>> {
    prop_oneof![
        (-5.0..5.0f64, -5.0..5.0f64, 0.1..2.0f64)
            .prop_map(|(x, y, r)| Obstacle::Circle { center: [x, y], radius: r }),
        (-5.0..5.0f64, -5.0..5.0f64, 0.1..2.0f64, 0.1..2.0f64).prop_map(|(x, y, w, h)| {
            Obstacle::Box { min: vec![x, y], max: vec![x + w, y + h] }
        }),
        (-5.0..5.0f64, -5.0..5.0f64, 0.2..2.0f64, 0.2..2.0f64).prop_map(|(x, y, w, h)| {
            // CCW triangle.
            Obstacle::Polygon { vertices: vec![[x, y], [x + w, y], [x, y + h]] }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn signed_distance_is_1_lipschitz(
        obstacle in arbitrary_obstacle(),
        ax in -8.0..8.0f64, ay in -8.0..8.0f64,
        bx in -8.0..8.0f64, by in -8.0..8.0f64,
    ) {
        let da = signed_distance(&[ax, ay], &obstacle).unwrap();
        let db = signed_distance(&[bx, by], &obstacle).unwrap();
        let separation = dist(&[ax, ay], &[bx, by]);
        prop_assert!((da - db).abs() <= separation + 1e-9);
    }

    #[test]
    fn constraint_sign_equivalence(
        obstacle in arbitrary_obstacle(),
        px in -8.0..8.0f64, py in -8.0..8.0f64,
        r_robot in 0.0..0.5f64, margin in 0.0..0.3f64,
    ) {
        let safety = SafetyConfig::new(r_robot, margin);
        let d = signed_distance(&[px, py], &obstacle).unwrap();
        let c = safety.r_safe() - d;
        prop_assert_eq!(c <= 0.0, d >= safety.r_safe());
    }

    #[test]
    fn validation_agrees_with_brute_force(seed in 0u64..50, v in 0.3..1.0f64, omega in -0.5..0.5f64) {
        let bounds = Aabb::new(vec![-10.0, -10.0], vec![10.0, 10.0]);
        let world = generate_box_field(seed, &bounds, 12, (0.4, 1.0), &[-6.0, 0.0], &[6.0, 0.0], 0.8)
            .unwrap();
        let safety = SafetyConfig::new(0.2, 0.1);
        let start = RobotState::Unicycle(UnicycleState::at_pose(-6.0, 0.0, 0.0));
        let traj = rollout(&MotionModel::Unicycle, &start, &ControlInput::unicycle(v, omega), 0.1, 40)
            .unwrap();
        let report = world.validate_trajectory(&traj, &safety).unwrap();

        let mut brute = None;
        'outer: for (step, state) in traj.iter().enumerate() {
            for (k, obstacle) in world.obstacles.iter().enumerate() {
                let p = state.position();
                if signed_distance(p.as_slice(), obstacle).unwrap() < safety.r_safe() {
                    brute = Some((step, k));
                    break 'outer;
                }
            }
        }
        prop_assert_eq!(report.feasible, brute.is_none());
        prop_assert_eq!(report.first_violation, brute);
    }

    #[test]
    fn bvh_query_equals_linear_scan(seed in 0u64..30, px in -10.0..10.0f64, py in -10.0..10.0f64) {
        let bounds = Aabb::new(vec![-10.0, -10.0], vec![10.0, 10.0]);
        // Dense forest so the BVH path is exercised.
        let world = generate_poisson_forest(seed, &bounds, 0.4, (0.1, 0.4), &[-9.0, -9.0], &[9.0, 9.0], 0.3)
            .unwrap();
        prop_assume!(world.obstacle_count() >= 16);
        let got = world.min_signed_distance(&[px, py]).unwrap().unwrap();
        let want = world
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| (signed_distance(&[px, py], o).unwrap(), i))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
            .unwrap();
        prop_assert!((got.0 - want.0).abs() < 1e-12);
        prop_assert_eq!(got.1, want.1);
    }
}

#[test]
fn poisson_forest_count_statistics() {
    // density * area = 150 expected obstacles; thinning around the small
    // endpoint carve-outs shifts the mean by only a couple of counts.
    let bounds = Aabb::new(vec![0.0, 0.0], vec![10.0, 10.0]);
    let expected = 150.0f64;
    let band = 3.0 * expected.sqrt();
    let mut total = 0.0;
    let seeds = 20;
    for seed in 0..seeds {
        let world = generate_poisson_forest(
            seed,
            &bounds,
            1.5,
            (0.02, 0.05),
            &[0.5, 0.5],
            &[9.5, 9.5],
            0.2,
        )
        .unwrap();
        let count = world.obstacle_count() as f64;
        assert!(
            (count - expected).abs() <= band,
            "seed {seed}: count {count} outside {expected} +/- {band}"
        );
        total += count;
    }
    let mean = total / seeds as f64;
    assert!(
        (mean - expected).abs() <= 3.0 * (expected / seeds as f64).sqrt(),
        "mean count {mean} drifted from {expected}"
    );
}

#[test]
fn bugtrap_opening_admits_feasible_corridor() {
    // Opening barely wider than the robot: flood fill over conservatively
    // free cells must still connect inside to outside.
    let safety = SafetyConfig::new(0.2, 0.1);
    let r_safe = safety.r_safe();
    let opening = 2.0 * r_safe + 0.3;
    let world = generate_bugtrap(opening, 0.2, 4.0, &[0.0, 0.0], &[-4.0, 0.0], &safety).unwrap();

    let cell = 0.05f64;
    let margin = r_safe + cell * std::f64::consts::SQRT_2 / 2.0;
    let (min, max) = (&world.bounds.min, &world.bounds.max);
    let nx = ((max[0] - min[0]) / cell).ceil() as usize;
    let ny = ((max[1] - min[1]) / cell).ceil() as usize;
    let center = |ix: usize, iy: usize| {
        [min[0] + (ix as f64 + 0.5) * cell, min[1] + (iy as f64 + 0.5) * cell]
    };
    let free = |ix: usize, iy: usize| match world.min_signed_distance(&center(ix, iy)).unwrap() {
        Some((d, _)) => d >= margin,
        None => true,
    };
    let index = |p: [f64; 2]| {
        (
            (((p[0] - min[0]) / cell) as usize).min(nx - 1),
            (((p[1] - min[1]) / cell) as usize).min(ny - 1),
        )
    };
    let start = index([0.0, 0.0]);
    let goal = index([-4.0, 0.0]);
    let mut seen = vec![false; nx * ny];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start.1 * nx + start.0] = true;
    let mut connected = false;
    while let Some((x, y)) = queue.pop_front() {
        if (x, y) == goal {
            connected = true;
            break;
        }
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let nx_ = x as i64 + dx;
            let ny_ = y as i64 + dy;
            if nx_ < 0 || ny_ < 0 || nx_ as usize >= nx || ny_ as usize >= ny {
                continue;
            }
            let (nx_, ny_) = (nx_ as usize, ny_ as usize);
            if !seen[ny_ * nx + nx_] && free(nx_, ny_) {
                seen[ny_ * nx + nx_] = true;
                queue.push_back((nx_, ny_));
            }
        }
    }
    assert!(connected, "corridor through the opening not found");
}
