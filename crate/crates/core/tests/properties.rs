mod common;

use proptest::prelude::*;

use relscore::baselines::{empirical_w22, TwoSampleInput};
use relscore::edgeworth::{
    ee_cdf_raw, ee_pdf, equal_tailed_quantiles, hermite, shortest_interval, EdgeworthParams, ExpansionGrid,
    ExpansionKind, QuantileMethod,
};
use relscore::estimator::{moment_summary, relative_score, ScoreSample};
use relscore::inference::{ci_clt, ci_edgeworth};
use relscore::matrix::Matrix;

fn kind() -> impl Strategy<Value = ExpansionKind> {
    prop_oneof![Just(ExpansionKind::Z), Just(ExpansionKind::T)]
}

fn params() -> impl Strategy<Value = EdgeworthParams> {
    (4usize..2000, -2.5f64..2.5, -1.5f64..6.0, kind())
        .prop_map(|(n, k3, k4, kind)| EdgeworthParams::new(n, k3, k4, kind).unwrap())
}

fn diffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 6..80).prop_filter("nonconstant", |v| v.iter().any(|x| *x != v[0]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mean_is_permutation_invariant(v in diffs(), seed in any::<u64>()) {
        let s = ScoreSample::from_diffs(&v).unwrap();
        let mut w = v.clone();
        let k = (seed % w.len() as u64) as usize;
        w.rotate_left(k);
        w.reverse();
        let t = ScoreSample::from_diffs(&w).unwrap();
        let (a, b) = (moment_summary(&s).unwrap(), moment_summary(&t).unwrap());
        prop_assert!((a.mean - b.mean).abs() <= 1e-12 * (1.0 + a.mean.abs()));
        prop_assert!((a.variance - b.variance).abs() <= 1e-10 * (1.0 + a.variance));
        prop_assert!((a.kurtosis_excess - b.kurtosis_excess).abs() <= 1e-9 * (1.0 + a.kurtosis_excess.abs()));
    }

    #[test]
    fn swapping_models_negates_odd_moments(v in diffs()) {
        let s = ScoreSample::from_diffs(&v).unwrap();
        let (a, b) = (moment_summary(&s).unwrap(), moment_summary(&s.swapped()).unwrap());
        prop_assert!((a.mean + b.mean).abs() <= 1e-12 * (1.0 + a.mean.abs()));
        prop_assert!((a.skewness + b.skewness).abs() <= 1e-10 * (1.0 + a.skewness.abs()));
        prop_assert_eq!(a.variance, b.variance);
    }

    #[test]
    fn common_shift_of_both_models_cancels(v in diffs(), shift in -1e3f64..1e3) {
        let ell1: Vec<f64> = v.iter().map(|d| d + shift).collect();
        let ell2 = vec![shift; v.len()];
        let s = ScoreSample::from_log_densities(ell1, ell2).unwrap();
        let r = ScoreSample::from_diffs(&v).unwrap();
        let (a, b) = (relative_score(&s).unwrap(), relative_score(&r).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + shift.abs()));
    }

    #[test]
    fn intervals_are_affine_equivariant(v in diffs(), scale in 0.01f64..50.0, shift in -10.0f64..10.0, k in kind()) {
        let s = ScoreSample::from_diffs(&v).unwrap();
        let t = ScoreSample::from_diffs(&v.iter().map(|x| scale * x + shift).collect::<Vec<_>>()).unwrap();
        let (a, b) = (ci_edgeworth(&s, 0.1, k, None).unwrap(), ci_edgeworth(&t, 0.1, k, None).unwrap());
        let tol = 1e-7 * (1.0 + scale) * (1.0 + a.lower.abs().max(a.upper.abs()) + shift.abs());
        prop_assert!((b.lower - (scale * a.lower + shift)).abs() <= tol, "{a:?} {b:?}");
        prop_assert!((b.upper - (scale * a.upper + shift)).abs() <= tol, "{a:?} {b:?}");
        let (c, d) = (ci_clt(&s, 0.1).unwrap(), ci_clt(&t, 0.1).unwrap());
        prop_assert!((d.length() - scale * c.length()).abs() <= 1e-9 * (1.0 + d.length()));
    }

    #[test]
    fn mirrored_parameters_reflect_the_cdf(p in params(), x in -8.0f64..8.0) {
        let m = p.mirrored();
        prop_assert!((ee_cdf_raw(x, &m) - (1.0 - ee_cdf_raw(-x, &p))).abs() <= 1e-12);
        prop_assert!((ee_pdf(x, &m) - ee_pdf(-x, &p)).abs() <= 1e-12);
    }

    #[test]
    fn mirrored_parameters_reflect_the_interval(p in params(), alpha in 0.01f64..0.5) {
        let (a, b) = (shortest_interval(&p, alpha).unwrap(), shortest_interval(&p.mirrored(), alpha).unwrap());
        prop_assert_eq!(a.method, b.method);
        prop_assert!((a.lo + b.hi).abs() <= 1e-6 && (a.hi + b.lo).abs() <= 1e-6, "{a:?} {b:?}");
    }

    #[test]
    fn density_is_derivative_of_cdf(p in params(), x in -7.0f64..7.0) {
        let h = 1e-4;
        let fd = (ee_cdf_raw(x + h, &p) - ee_cdf_raw(x - h, &p)) / (2.0 * h);
        prop_assert!((fd - ee_pdf(x, &p)).abs() <= 1e-6);
    }

    #[test]
    fn shortest_never_longer_than_equal_tailed(p in params(), alpha in 0.01f64..0.5) {
        let s = shortest_interval(&p, alpha).unwrap();
        prop_assert!(s.lo < s.hi);
        if s.method == QuantileMethod::ShortestInterval {
            let e = equal_tailed_quantiles(&p, alpha).unwrap();
            prop_assert!(s.length() <= e.length() + 1e-9, "{s:?} {e:?}");
            let g = ExpansionGrid::new(p);
            prop_assert!((g.cdf_monotone(s.hi) - g.cdf_monotone(s.lo) - (1.0 - alpha)).abs() <= 1e-6);
        }
    }

    #[test]
    fn monotone_cdf_is_nondecreasing(p in params()) {
        let g = ExpansionGrid::new(p);
        let mut prev = 0.0;
        for i in 0..=2400 {
            let c = g.cdf_monotone(-12.0 + 0.01 * i as f64);
            prop_assert!((0.0..=1.0).contains(&c) && c >= prev);
            prev = c;
        }
    }

    #[test]
    fn hermite_satisfies_three_term_recurrence(x in -10.0f64..10.0, k in 1usize..8) {
        let (a, b, c) = (hermite(k + 1, x).unwrap(), hermite(k, x).unwrap(), hermite(k - 1, x).unwrap());
        prop_assert!((a - (x * b - k as f64 * c)).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn one_dimensional_w2_matches_sorting(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60)
    ) {
        let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let col = |v: &[f64]| Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap();
        let w = empirical_w22(TwoSampleInput::new(&col(&xs), &col(&ys)).unwrap()).unwrap();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let exact = xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / xs.len() as f64;
        prop_assert!((w - exact).abs() <= 1e-12 * (1.0 + exact));
    }
}

#[test]
fn hermite_rejects_high_orders() {
    assert!(hermite(9, 0.5).is_err());
}

#[test]
fn expansion_density_integrates_to_one() {
    for (k3, k4, kind) in [(0.8, 1.0, ExpansionKind::T), (-1.2, 2.0, ExpansionKind::Z), (0.0, 0.0, ExpansionKind::T)] {
        let p = EdgeworthParams::new(50, k3, k4, kind).unwrap();
        let mass = common::simpson(|x| ee_pdf(x, &p), -12.0, 12.0, 20_000);
        assert!((mass - 1.0).abs() < 1e-9, "{mass}");
    }
}
