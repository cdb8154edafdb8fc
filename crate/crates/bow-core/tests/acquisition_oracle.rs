//! Acquisition-function checks against independent oracles: Monte-Carlo
//! expected improvement, a series-based error function, and dense-grid
//! acquisition maximization.

use bow_core::acquisition::{
    expected_improvement, feasibility_probability, maximize_cei, AcquisitionContext,
};
use bow_core::gp::{gp_fit, Dataset, KernelHyperparams};
use bow_core::kinematics::ControlWindow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Monte-Carlo estimate of `E[max(y_minus - Y, 0)]`, `Y ~ N(mean, std^2)`,
/// with its standard error.
fn mc_expected_improvement(
    mean: f64,
    std: f64,
    y_minus: f64,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let normal = StandardNormal;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let z: f64 = normal.sample(rng);
        let improvement = (y_minus - (mean + std * z)).max(0.0);
        sum += improvement;
        sum_sq += improvement * improvement;
    }
    let estimate = sum / draws as f64;
    let variance = (sum_sq / draws as f64 - estimate * estimate).max(0.0);
    (estimate, (variance / draws as f64).sqrt())
}

#[test]
fn ei_matches_monte_carlo_spot_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    // y- = mu, sigma = 1: EI = pdf(0).
    let closed = expected_improvement(0.0f64, 1.0, 0.0);
    assert!((closed - 0.39894).abs() < 1e-4);
    let (mc, se) = mc_expected_improvement(0.0, 1.0, 0.0, 1_000_000, &mut rng);
    assert!(
        (closed - mc).abs() <= 3.0 * se,
        "closed {closed} vs MC {mc} (3se {})",
        3.0 * se
    );
    // z = -3.
    let closed = expected_improvement(3.0f64, 1.0, 0.0);
    assert!((closed - 0.000382).abs() < 1e-4);
    let (mc, se) = mc_expected_improvement(3.0, 1.0, 0.0, 1_000_000, &mut rng);
    assert!((closed - mc).abs() <= 3.0 * se);
}

/// Series-based error function, cross-checked digits for |x| <= 4.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..300 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn phi_series(z: f64) -> f64 {
    0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
}

#[test]
fn feasibility_matches_series_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let mean: f64 = rng.random_range(-3.0..3.0);
        let std: f64 = rng.random_range(0.05..2.0);
        let z = -mean / std;
        if z.abs() > 4.0 {
            continue;
        }
        let got = feasibility_probability(&[(mean, std)]);
        let want = phi_series(z);
        assert!((got - want).abs() < 1e-10, "({mean},{std}): {got} vs {want}");
    }
}

#[test]
fn feasibility_product_law_up_to_five() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 1..=5usize {
        for _ in 0..50 {
            // |z| stays below 4 so the series oracle keeps full precision.
            let posteriors: Vec<(f64, f64)> = (0..k)
                .map(|_| (rng.random_range(-1.5..1.5), rng.random_range(0.4..1.5)))
                .collect();
            let got = feasibility_probability(&posteriors);
            let want: f64 = posteriors
                .iter()
                .map(|&(m, s)| phi_series(-m / s))
                .product();
            assert!((got - want).abs() < 1e-10);
        }
    }
}

fn random_context_models(
    seed: u64,
) -> (bow_core::gp::GpModel<f64>, Vec<bow_core::gp::GpModel<f64>>, Option<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let mut objective = Dataset::new();
    let mut constraint = Dataset::new();
    for _ in 0..n {
        let u = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let y = rng.random_range(0.0..2.0);
        let c = rng.random_range(-1.0..1.0);
        objective.push(u.clone(), y);
        constraint.push(u, c);
    }
    let h = KernelHyperparams::new(1.0, vec![0.3, 0.3], 1e-8).unwrap();
    let objective_model = gp_fit(&objective, &h).unwrap();
    let constraint_model = gp_fit(&constraint, &h).unwrap();
    let incumbent = objective
        .targets
        .iter()
        .zip(&constraint.targets)
        .filter(|(_, c)| **c <= 0.0)
        .map(|(y, _)| *y)
        .fold(None, |best: Option<f64>, v| Some(best.map_or(v, |b| b.min(v))));
    (objective_model, vec![constraint_model], incumbent)
}

#[test]
fn maximize_cei_matches_dense_grid_2d() {
    let window = ControlWindow { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
    let mut hits = 0;
    let total = 20;
    for seed in 0..total {
        let (objective, constraints, incumbent) = random_context_models(seed);
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &constraints,
            incumbent,
            window: &window,
        };
        let found = maximize_cei(&ctx, 256, seed ^ 0xab).unwrap();
        assert!(window.contains(&found));

        let mut best = (f64::NEG_INFINITY, vec![0.0, 0.0]);
        for i in 0..100 {
            for j in 0..100 {
                let u = vec![i as f64 / 99.0, j as f64 / 99.0];
                let v = ctx.cei(&u).unwrap();
                if v > best.0 {
                    best = (v, u);
                }
            }
        }
        let within = (0..2).all(|d| (found[d] - best.1[d]).abs() <= 1e-2);
        if within {
            hits += 1;
        }
    }
    assert!(hits >= 19, "only {hits}/{total} dense-grid matches");
}

#[test]
fn feasibility_probability_sharpens_to_indicator() {
    // 1-D constraint c(u) = u - 0.5 sampled densely; away from the boundary
    // the feasibility probability must approach the indicator.
    let mut data = Dataset::new();
    for i in 0..50 {
        let u = bow_core::halton::radical_inverse(i + 1, 2);
        data.push(vec![u], u - 0.5);
    }
    let variance = {
        let mean = data.targets.iter().sum::<f64>() / 50.0;
        data.targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 50.0
    };
    let h = KernelHyperparams::new(variance.max(1e-6), vec![0.3], 1e-8).unwrap();
    let model = gp_fit(&data, &h).unwrap();
    for k in 0..=200 {
        let u = k as f64 / 200.0;
        let c = u - 0.5;
        if c.abs() <= 0.2 {
            continue;
        }
        let (mean, std) = model.posterior(&[u]).unwrap();
        let pf = feasibility_probability(&[(mean, std)]);
        let indicator = if c <= 0.0 { 1.0 } else { 0.0 };
        assert!(
            (pf - indicator).abs() <= 0.05,
            "u={u}: feasibility {pf} vs indicator {indicator}"
        );
    }
}
