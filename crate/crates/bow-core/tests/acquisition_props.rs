//! Property tests for the acquisition functions.

use bow_core::acquisition::{expected_improvement, feasibility_probability};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn ei_is_nonnegative(
        mean in -10.0..10.0f64,
        std in 0.0..5.0f64,
        incumbent in -10.0..10.0f64,
    ) {
        prop_assert!(expected_improvement(mean, std, incumbent) >= 0.0);
    }

    #[test]
    fn ei_nondecreasing_in_std(
        mean in -3.0..3.0f64,
        incumbent in -3.0..3.0f64,
        step in 0.01..0.5f64,
    ) {
        let mut previous = expected_improvement(mean, 0.0, incumbent);
        for i in 1..20 {
            let ei = expected_improvement(mean, step * i as f64, incumbent);
            prop_assert!(ei >= previous - 1e-12);
            previous = ei;
        }
    }

    #[test]
    fn feasibility_in_unit_interval_and_monotone_in_k(
        means in prop::collection::vec(-3.0..3.0f64, 1..6),
        stds in prop::collection::vec(0.01..2.0f64, 6),
    ) {
        let posteriors: Vec<(f64, f64)> =
            means.iter().zip(&stds).map(|(&m, &s)| (m, s)).collect();
        let p = feasibility_probability(&posteriors);
        prop_assert!((0.0..=1.0).contains(&p));
        // Adding a constraint can only shrink the probability.
        let mut extended = posteriors.clone();
        extended.push((0.0, 1.0));
        prop_assert!(feasibility_probability(&extended) <= p + 1e-15);
    }
}
