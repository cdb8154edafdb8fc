//! Expected Improvement, feasibility probability, constrained EI, and its
//! maximization over the control window.

use crate::gp::{GpError, GpModel};
use crate::halton::ScrambledHalton;
use crate::kinematics::ControlWindow;
use crate::normal;
use crate::scalar::{lit, Real};

/// Expected improvement below the incumbent `y_minus` for a Gaussian
/// posterior `(mean, std)`. At `std == 0` this degenerates to the
/// deterministic improvement `max(y_minus - mean, 0)`.
pub fn expected_improvement<T: Real>(mean: T, std: T, y_minus: T) -> T {
    debug_assert!(std >= T::zero());
    let gap = y_minus - mean;
    if std == T::zero() {
        return gap.max(T::zero());
    }
    let z = gap / std;
    (gap * normal::cdf(z) + std * normal::pdf(z)).max(T::zero())
}

/// Probability that every constraint is non-positive, as the product of the
/// per-constraint Gaussian tail probabilities `Phi(-mean_k / std_k)`. A
/// deterministic constraint (`std == 0`) contributes an indicator factor.
pub fn feasibility_probability<T: Real>(constraint_posteriors: &[(T, T)]) -> T {
    let mut probability = T::one();
    for &(mean, std) in constraint_posteriors {
        debug_assert!(std >= T::zero());
        let factor = if std == T::zero() {
            if mean <= T::zero() {
                T::one()
            } else {
                T::zero()
            }
        } else {
            normal::cdf(-mean / std)
        };
        probability *= factor;
    }
    probability
}

/// Surrogates and incumbent for one acquisition query.
pub struct AcquisitionContext<'a, T = f64> {
    pub objective: &'a GpModel<T>,
    pub constraints: &'a [GpModel<T>],
    /// Best observed feasible objective value; absent until a feasible
    /// sample exists, in which case the acquisition degrades to pure
    /// feasibility probability.
    pub incumbent: Option<T>,
    pub window: &'a ControlWindow<T>,
}

impl<'a, T: Real> AcquisitionContext<'a, T> {
    /// Expected improvement times feasibility probability at a control.
    pub fn cei(&self, u: &[T]) -> Result<T, GpError> {
        let pf = self.feasibility(u)?;
        match self.incumbent {
            Some(y_minus) => {
                let (mean, std) = self.objective.posterior(u)?;
                Ok(expected_improvement(mean, std, y_minus) * pf)
            }
            None => Ok(pf),
        }
    }

    /// Feasibility probability at a control.
    pub fn feasibility(&self, u: &[T]) -> Result<T, GpError> {
        let mut posteriors = Vec::with_capacity(self.constraints.len());
        for model in self.constraints {
            posteriors.push(model.posterior(u)?);
        }
        Ok(feasibility_probability(&posteriors))
    }
}

/// Constrained expected improvement at `u`.
pub fn cei<T: Real>(u: &[T], ctx: &AcquisitionContext<T>) -> Result<T, GpError> {
    ctx.cei(u)
}

const REFINE_ITERATIONS: usize = 20;
const REFINE_SHRINK: f64 = 0.6;
const INITIAL_STEP_FRACTION: f64 = 0.25;
const REFINE_STARTS: usize = 16;

/// Maximizes CEI over the window: scores a scrambled low-discrepancy
/// candidate set, refines the top candidates by bounded coordinate descent
/// (20 iterations, step shrinking on non-improving sweeps), and returns the
/// argmax found. Deterministic for a given seed.
///
/// When the CEI landscape is identically zero (no candidate has positive
/// feasibility-weighted improvement) the search falls back to maximizing
/// feasibility probability alone. Ties break toward the lexicographically
/// smallest control vector.
pub fn maximize_cei<T: Real>(
    ctx: &AcquisitionContext<T>,
    candidate_budget: usize,
    rng_seed: u64,
) -> Result<Vec<T>, GpError> {
    assert!(candidate_budget >= 1, "candidate budget must be at least 1");
    let dim = ctx.window.dim();

    // Low-discrepancy candidates plus deterministic probes at the window
    // corners and center; CEI peaks often sit on the window boundary.
    let mut candidates: Vec<Vec<T>> = ScrambledHalton::new(dim, rng_seed)
        .take(candidate_budget)
        .map(|unit| ctx.window.lerp(&unit))
        .collect();
    for corner in 0..(1usize << dim) {
        let u: Vec<T> = (0..dim)
            .map(|d| {
                if corner >> d & 1 == 1 {
                    ctx.window.upper[d]
                } else {
                    ctx.window.lower[d]
                }
            })
            .collect();
        candidates.push(u);
    }
    candidates.push(ctx.window.lerp(&vec![0.5; dim]));

    let mut scored: Vec<(T, T, Vec<T>)> = Vec::with_capacity(candidates.len());
    for u in candidates {
        let pf = ctx.feasibility(&u)?;
        let score = match ctx.incumbent {
            Some(y_minus) => {
                let (mean, std) = ctx.objective.posterior(&u)?;
                expected_improvement(mean, std, y_minus) * pf
            }
            None => pf,
        };
        scored.push((score, pf, u));
    }

    // Dead landscape: chase feasibility instead of improvement.
    let use_feasibility = scored.iter().all(|(score, _, _)| *score <= T::zero());
    let key = |entry: &(T, T, Vec<T>)| if use_feasibility { entry.1 } else { entry.0 };
    scored.sort_by(|a, b| {
        key(b)
            .partial_cmp(&key(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                if a.2 == b.2 {
                    std::cmp::Ordering::Equal
                } else if lex_less(&a.2, &b.2) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            })
    });

    let score_at = |u: &[T]| -> Result<T, GpError> {
        if use_feasibility {
            ctx.feasibility(u)
        } else {
            ctx.cei(u)
        }
    };

    let mut best: Option<(T, Vec<T>)> = None;
    for entry in scored.iter().take(REFINE_STARTS.min(scored.len())) {
        let mut current = entry.2.clone();
        let mut current_score = key(entry);
        let mut steps: Vec<T> = (0..dim)
            .map(|d| ctx.window.width(d) * lit::<T>(INITIAL_STEP_FRACTION))
            .collect();
        for _ in 0..REFINE_ITERATIONS {
            let mut improved = false;
            for d in 0..dim {
                if steps[d] == T::zero() {
                    continue;
                }
                for sign in [T::one(), -T::one()] {
                    let mut trial = current.clone();
                    trial[d] = trial[d] + sign * steps[d];
                    ctx.window.clamp(&mut trial);
                    let s = score_at(&trial)?;
                    if s > current_score || (s == current_score && lex_less(&trial, &current)) {
                        if s > current_score {
                            improved = true;
                        }
                        current_score = s;
                        current = trial;
                    }
                }
            }
            if !improved {
                for step in &mut steps {
                    *step = *step * lit::<T>(REFINE_SHRINK);
                }
            }
        }
        let better = match &best {
            None => true,
            Some((s, u)) => {
                current_score > *s || (current_score == *s && lex_less(&current, u))
            }
        };
        if better {
            best = Some((current_score, current));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// Exploitation-limit recommendation over the window: the argmin of the
/// objective posterior mean over the region whose constraint posterior means
/// are all non-positive — the limit the constrained acquisition converges to
/// as posterior uncertainty vanishes. When no candidate is mean-feasible the
/// search maximizes feasibility probability instead.
///
/// This selects the control to actually execute after sampling ends;
/// exploration stays in [`maximize_cei`], which drives the evaluations.
pub fn recommend_exploit<T: Real>(
    ctx: &AcquisitionContext<T>,
    candidate_budget: usize,
    rng_seed: u64,
) -> Result<Vec<T>, GpError> {
    assert!(candidate_budget >= 1, "candidate budget must be at least 1");
    let dim = ctx.window.dim();

    // (mean-feasible?, -objective mean, feasibility probability): higher is
    // better lexicographically on (feasible, then -mean or probability).
    let score_at = |u: &[T]| -> Result<(bool, T, T), GpError> {
        let mut feasible = true;
        for model in ctx.constraints {
            let (mean, _) = model.posterior(u)?;
            if mean > T::zero() {
                feasible = false;
                break;
            }
        }
        let (mean, _) = ctx.objective.posterior(u)?;
        let pf = ctx.feasibility(u)?;
        Ok((feasible, -mean, pf))
    };
    let better = |a: &(bool, T, T), a_u: &[T], b: &(bool, T, T), b_u: &[T]| -> bool {
        if a.0 != b.0 {
            return a.0;
        }
        let (ka, kb) = if a.0 { (a.1, b.1) } else { (a.2, b.2) };
        ka > kb || (ka == kb && lex_less(a_u, b_u))
    };

    let mut candidates: Vec<Vec<T>> = ScrambledHalton::new(dim, rng_seed)
        .take(candidate_budget)
        .map(|unit| ctx.window.lerp(&unit))
        .collect();
    for corner in 0..(1usize << dim) {
        candidates.push(
            (0..dim)
                .map(|d| {
                    if corner >> d & 1 == 1 {
                        ctx.window.upper[d]
                    } else {
                        ctx.window.lower[d]
                    }
                })
                .collect(),
        );
    }
    candidates.push(ctx.window.lerp(&vec![0.5; dim]));
    // Edge midpoints anchor the search on the window boundary, where the
    // best command often sits.
    for d in 0..dim {
        for bound in [ctx.window.lower[d], ctx.window.upper[d]] {
            let mut u = ctx.window.lerp(&vec![0.5; dim]);
            u[d] = bound;
            candidates.push(u);
        }
    }

    let mut ranked: Vec<((bool, T, T), Vec<T>)> = Vec::with_capacity(candidates.len());
    for u in candidates {
        ranked.push((score_at(&u)?, u));
    }
    ranked.sort_by(|a, b| {
        if better(&a.0, &a.1, &b.0, &b.1) {
            std::cmp::Ordering::Less
        } else if better(&b.0, &b.1, &a.0, &a.1) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });

    let mut best: Option<((bool, T, T), Vec<T>)> = None;
    for entry in ranked.iter().take(REFINE_STARTS.min(ranked.len())) {
        let mut current = entry.1.clone();
        let mut current_score = entry.0;
        let mut steps: Vec<T> = (0..dim)
            .map(|d| ctx.window.width(d) * lit::<T>(INITIAL_STEP_FRACTION))
            .collect();
        for _ in 0..REFINE_ITERATIONS {
            let mut improved = false;
            for d in 0..dim {
                if steps[d] == T::zero() {
                    continue;
                }
                for sign in [T::one(), -T::one()] {
                    let mut trial = current.clone();
                    trial[d] = trial[d] + sign * steps[d];
                    ctx.window.clamp(&mut trial);
                    let s = score_at(&trial)?;
                    if better(&s, &trial, &current_score, &current) {
                        improved = true;
                        current_score = s;
                        current = trial;
                    }
                }
            }
            if !improved {
                for step in &mut steps {
                    *step = *step * lit::<T>(REFINE_SHRINK);
                }
            }
        }
        let replace = match &best {
            None => true,
            Some((s, u)) => better(&current_score, &current, s, u),
        };
        if replace {
            best = Some((current_score, current));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

fn lex_less<T: Real>(a: &[T], b: &[T]) -> bool {
    if b.is_empty() {
        return true;
    }
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{gp_fit, Dataset, KernelHyperparams};

    #[test]
    fn ei_degenerate_deterministic_case() {
        assert_eq!(expected_improvement(1.0f64, 0.0, 3.0), 2.0);
        assert_eq!(expected_improvement(5.0f64, 0.0, 3.0), 0.0);
    }

    #[test]
    fn ei_at_incumbent_mean_unit_std() {
        // (y- - mu) = 0, so EI = sigma * pdf(0).
        let ei = expected_improvement(0.0f64, 1.0, 0.0);
        assert!((ei - 0.3989422804014327).abs() < 1e-12);
    }

    #[test]
    fn ei_three_sigma_above_incumbent() {
        // mu = y- + 3 sigma: EI = -3 Phi(-3) + pdf(-3).
        let ei = expected_improvement(3.0f64, 1.0, 0.0);
        assert!((ei - 0.00038215431707416413).abs() < 1e-10);
        assert!((ei - 0.000382).abs() < 1e-6);
    }

    #[test]
    fn ei_monotone_in_std_below_incumbent() {
        let mut previous = 0.0f64;
        for i in 0..50 {
            let std = i as f64 * 0.1;
            let ei = expected_improvement(-0.5f64, std, 0.0);
            assert!(ei >= previous - 1e-15, "EI not monotone at std {std}");
            previous = ei;
        }
    }

    #[test]
    fn feasibility_reference_values() {
        assert_eq!(feasibility_probability(&[(0.0f64, 1.0)]), 0.5);
        let p = feasibility_probability(&[(-2.0f64, 1.0)]);
        assert!((p - 0.9772498680518208).abs() < 1e-12);
        // Product rule.
        let p2 = feasibility_probability(&[(0.0f64, 1.0), (0.0, 2.0)]);
        assert!((p2 - 0.25).abs() < 1e-15);
        // Deterministic factors.
        assert_eq!(feasibility_probability(&[(-1.0f64, 0.0)]), 1.0);
        assert_eq!(feasibility_probability(&[(1.0f64, 0.0)]), 0.0);
        // Empty product.
        assert_eq!(feasibility_probability::<f64>(&[]), 1.0);
    }

    fn toy_model(targets: &[f64]) -> crate::gp::GpModel<f64> {
        let mut data = Dataset::new();
        for (i, &t) in targets.iter().enumerate() {
            data.push(vec![i as f64 / targets.len() as f64], t);
        }
        let h = KernelHyperparams::new(1.0, vec![0.3], 1e-8).unwrap();
        gp_fit(&data, &h).unwrap()
    }

    #[test]
    fn cei_zero_when_infeasible_and_equals_ei_without_constraints() {
        let objective = toy_model(&[1.0, 0.5, 0.8]);
        // A constraint that is confidently violated everywhere.
        let violated = toy_model(&[5.0, 5.0, 5.0]);
        let window = ControlWindow { lower: vec![0.0], upper: vec![1.0] };

        let constraints = [violated];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &constraints,
            incumbent: Some(0.5),
            window: &window,
        };
        assert!(ctx.cei(&[0.4]).unwrap() < 1e-12);

        let no_constraints: [crate::gp::GpModel<f64>; 0] = [];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &no_constraints,
            incumbent: Some(0.5),
            window: &window,
        };
        let (mean, std) = objective.posterior(&[0.4]).unwrap();
        let want = expected_improvement(mean, std, 0.5);
        assert!((ctx.cei(&[0.4]).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn cei_is_product_of_components() {
        let objective = toy_model(&[1.0, 0.2, 0.9, 0.4]);
        let constraint = toy_model(&[-0.5, 0.3, -0.2, 0.1]);
        let window = ControlWindow { lower: vec![0.0], upper: vec![1.0] };
        let constraints = [constraint];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &constraints,
            incumbent: Some(0.4),
            window: &window,
        };
        for i in 0..20 {
            let u = [i as f64 / 19.0];
            let (mean, std) = objective.posterior(&u).unwrap();
            let (cm, cs) = constraints[0].posterior(&u).unwrap();
            let want = expected_improvement(mean, std, 0.4) * normal::cdf(-cm / cs);
            assert!((ctx.cei(&u).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn cei_bounded_by_ei() {
        let objective = toy_model(&[1.0, 0.2, 0.9, 0.4]);
        let constraint = toy_model(&[-0.5, 0.3, -0.2, 0.1]);
        let window = ControlWindow { lower: vec![0.0], upper: vec![1.0] };
        let constraints = [constraint];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &constraints,
            incumbent: Some(0.4),
            window: &window,
        };
        for i in 0..50 {
            let u = [i as f64 / 49.0];
            let (mean, std) = objective.posterior(&u).unwrap();
            let ei = expected_improvement(mean, std, 0.4);
            assert!(ctx.cei(&u).unwrap() <= ei + 1e-15);
        }
    }

    #[test]
    fn maximize_cei_stays_in_window_and_is_deterministic() {
        let objective = toy_model(&[1.0, 0.2, 0.9, 0.4, 0.6]);
        let window = ControlWindow { lower: vec![0.0], upper: vec![1.0] };
        let no_constraints: [crate::gp::GpModel<f64>; 0] = [];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &no_constraints,
            incumbent: Some(0.4),
            window: &window,
        };
        let a = maximize_cei(&ctx, 128, 7).unwrap();
        let b = maximize_cei(&ctx, 128, 7).unwrap();
        assert_eq!(a, b);
        assert!(window.contains(&a));
    }

    #[test]
    fn maximize_cei_matches_dense_grid_1d() {
        let objective = toy_model(&[2.0, 1.0, 0.1, 1.5, 2.5]);
        let window = ControlWindow { lower: vec![0.0], upper: vec![1.0] };
        let no_constraints: [crate::gp::GpModel<f64>; 0] = [];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &no_constraints,
            incumbent: Some(0.5),
            window: &window,
        };
        let found = maximize_cei(&ctx, 128, 3).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..10_000 {
            let u = [i as f64 / 9_999.0];
            let v = ctx.cei(&u).unwrap();
            if v > best.0 {
                best = (v, u[0]);
            }
        }
        assert!(
            (found[0] - best.1).abs() <= 1e-2,
            "maximizer {} vs dense-grid {}",
            found[0],
            best.1
        );
    }

    #[test]
    fn maximize_cei_falls_back_to_feasibility() {
        let objective = toy_model(&[1.0, 1.0, 1.0]);
        // Constraint mean ramps from clearly violated to clearly satisfied
        // as u increases; no feasible incumbent exists.
        let mut data = Dataset::new();
        for i in 0..6 {
            let u = i as f64 / 5.0;
            data.push(vec![u], 2.0 - 2.5 * u);
        }
        let h = KernelHyperparams::new(1.0, vec![0.3], 1e-8).unwrap();
        let constraint = gp_fit(&data, &h).unwrap();
        let window = ControlWindow { lower: vec![0.0], upper: vec![1.0] };
        let constraints = [constraint];
        let ctx = AcquisitionContext {
            objective: &objective,
            constraints: &constraints,
            incumbent: None,
            window: &window,
        };
        let u = maximize_cei(&ctx, 64, 11).unwrap();
        // The sampled constraint crosses zero at u = 0.8; the fallback must
        // land in the high-feasibility region (ties walk it down to the
        // saturation edge).
        assert!(u[0] > 0.8, "fallback picked {u:?}");
        let pf = ctx.feasibility(&u).unwrap();
        assert!(pf > 0.99, "feasibility at fallback {pf}");
    }
}
