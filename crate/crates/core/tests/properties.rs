mod common;

use common::*;
use proptest::prelude::*;
use vcnis::group_scad::{scad_penalty, scad_penalty_derivative};
use vcnis::marginal_screen::{rank_ascending, rank_descending, screen_all, select_by_threshold};
use vcnis::permutation::qth_largest;
use vcnis::simgen::robust_sd;
use vcnis::SplineBasis;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_sums_to_one(
        mut interior in prop::collection::vec(0.01f64..0.99, 0..6),
        degree in 1usize..5,
        points in prop::collection::vec(0.0f64..=1.0, 1..50),
    ) {
        interior.sort_by(f64::total_cmp);
        interior.dedup();
        let b = SplineBasis::with_interior_knots(&interior, 0.0, 1.0, degree).unwrap();
        for &x in &points {
            let v = b.eval(x);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(v.iter().all(|&c| c >= -1e-14));
            for (k, &c) in v.iter().enumerate() {
                prop_assert!((c - cox_de_boor(b.knots(), k, degree, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn utilities_nest_and_rankings_agree(seed in 0u64..10_000, p in 1usize..12, l in 4usize..8) {
        let d = random_dataset(60, p, &[(0, 1.0)], seed);
        let b = SplineBasis::build(d.w(), l, 3).unwrap();
        let r = screen_all(&d, &b).unwrap();
        prop_assert!(r.scores.iter().all(|&u| u >= -1e-8));
        prop_assert_eq!(rank_descending(&r.scores), rank_ascending(&r.rss));
        let mut sorted = r.ranking.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..p).collect::<Vec<_>>());
    }

    #[test]
    fn threshold_selection_is_a_set_comprehension(
        scores in prop::collection::vec(-5.0f64..5.0, 1..30),
        tau in -6.0f64..6.0,
    ) {
        let mut r = vcnis::ScreenReport::from_scores(scores.clone(), vec![0.0; scores.len()], Vec::new());
        r.apply_threshold(tau, vcnis::marginal_screen::ScreenMethod::FixedThreshold, None);
        let expected: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] >= tau).collect();
        prop_assert_eq!(&select_by_threshold(&r, tau), &expected);
        prop_assert_eq!(&r.selected, &expected);
        prop_assert_eq!(select_by_threshold(&r, f64::NEG_INFINITY).len(), scores.len());
    }

    #[test]
    fn qth_largest_is_monotone(values in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let mut prev = f64::INFINITY;
        for q in 1..=values.len() {
            let t = qth_largest(&values, q).unwrap();
            prop_assert!(t <= prev);
            prop_assert_eq!(values.iter().filter(|&&v| v > t).count() < q, true);
            prev = t;
        }
    }

    #[test]
    fn scad_derivative_is_bounded_and_nonincreasing(lambda in 0.01f64..5.0, x in 0.0f64..30.0, dx in 0.0f64..3.0) {
        let a = 3.7;
        let d = scad_penalty_derivative(x, lambda, a);
        prop_assert!((0.0..=lambda).contains(&d));
        prop_assert!(scad_penalty_derivative(x + dx, lambda, a) <= d);
        prop_assert!(scad_penalty(x + dx, lambda, a) >= scad_penalty(x, lambda, a));
        prop_assert!(scad_penalty(x, lambda, a) <= (a + 1.0) * lambda * lambda / 2.0 + 1e-12);
    }

    #[test]
    fn robust_sd_is_scale_equivariant(values in prop::collection::vec(-10.0f64..10.0, 2..40), c in 0.1f64..10.0) {
        let s = robust_sd(&values).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| c * v + 3.0).collect();
        prop_assert!((robust_sd(&scaled).unwrap() - c * s).abs() < 1e-9 * (1.0 + c * s));
    }
}
