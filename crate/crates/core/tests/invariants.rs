use gapflow::eval::{eval_circle, eval_point, tail_bound};
use gapflow::gapseries::{construct_counterexample, construct_example, Term};
use gapflow::membership::{gamma_profile, kww_witness, majorant_bound, Verdict};
use gapflow::radius::Radius;
use gapflow::{Complex, GapSeries, Weight};
use proptest::prelude::*;

fn gap_series(max_terms: usize) -> impl Strategy<Value = GapSeries> {
    (
        1u64..6,
        proptest::collection::vec((2u64..5, -3.0f64..3.0, -3.0f64..3.0), 1..max_terms),
    )
        .prop_map(|(n0, steps)| {
            let mut n = n0;
            let mut terms = Vec::with_capacity(steps.len());
            for (mult, re, im) in steps {
                terms.push(Term::new(n, Complex::new(re, im)));
                n *= mult;
            }
            GapSeries::new(terms).unwrap()
        })
}

fn weights() -> impl Strategy<Value = Weight> {
    prop_oneof![
        (0.2f64..2.0).prop_map(|a| Weight::power(a).unwrap()),
        (0.5f64..3.0).prop_map(|a| Weight::log_power(a).unwrap()),
        (0.5f64..2.0, 1u32..3).prop_map(|(a, d)| Weight::iterated_log(a, d).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn padding_keeps_the_function(s in gap_series(8), r in 0.1f64..0.999, phi in -3.2f64..3.2) {
        let p = s.pad().unwrap();
        let r = Radius::from_r(r).unwrap();
        let (a, b) = (eval_point(&s, &r, phi), eval_point(&p, &r, phi));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn profile_is_sign_symmetric(s in gap_series(10), w in weights()) {
        prop_assert_eq!(gamma_profile(&s, &w), gamma_profile(&-&s, &w));
    }

    #[test]
    fn majorant_dominates_circle(s in gap_series(7), w in weights(), k in 1u32..14) {
        let r = Radius::from_u(k as f64 * 0.5).unwrap();
        let maj = majorant_bound(&s, &w, &r, None).unwrap();
        let m = (8 * s.max_frequency() as usize + 64).min(1 << 16);
        let sup = eval_circle(&s, &r, m).iter().fold(0f64, |a, x| a.max(x.abs()));
        prop_assert!(sup <= maj.bound * (1.0 + 1e-12), "sup {} bound {}", sup, maj.bound);
    }

    #[test]
    fn tail_bound_dominates_tail(s in gap_series(10), w in weights(), n_split in 1u64..40, k in 1u32..10, phi in -3.2f64..3.2) {
        let r = Radius::from_u(k as f64 * 0.5).unwrap();
        let tb = tail_bound(&s, &w, n_split, &r, None).unwrap();
        let tail: Vec<Term<f64>> = s.terms().iter().filter(|t| t.n as f64 > tb.split).copied().collect();
        let tail = GapSeries::new(tail).unwrap();
        let value = eval_point(&tail, &r, phi);
        prop_assert!(value.abs() <= tb.bound * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn witness_ratio_in_unit_interval(s in gap_series(8), w in weights(), n in 1u64..64) {
        prop_assume!(s.terms().iter().any(|t| t.a.norm() > 1e-3));
        let wit = kww_witness(&s, &w, n, 1 << 10).unwrap();
        prop_assert!(wit.alpha_hat > 0.0 && wit.alpha_hat <= 1.0, "{}", wit.alpha_hat);
    }

    #[test]
    fn witness_is_one_for_positive_coefficients(s in gap_series(8), w in weights(), n in 1u64..64) {
        let pos: Vec<Term<f64>> = s.terms().iter().map(|t| Term::real(t.n, t.a.norm() + 0.1)).collect();
        let s = GapSeries::new(pos).unwrap();
        let wit = kww_witness(&s, &w, n, 1 << 10).unwrap();
        prop_assert!((wit.alpha_hat - 1.0).abs() < 1e-12);
    }
}

#[test]
fn example_and_counterexample_separate() {
    let w = Weight::log_power(1.0).unwrap();
    let ex = gamma_profile(&construct_example(&w, 2.0, 30).unwrap().series, &w);
    let cx = gamma_profile(&construct_counterexample(&w, 30).unwrap().series, &w);
    assert_eq!(ex.verdict, Verdict::Member);
    assert_eq!(cx.verdict, Verdict::NonMember);
    assert!(cx.gamma_sup >= 5.0 * ex.gamma_sup, "{} vs {}", cx.gamma_sup, ex.gamma_sup);
}

#[test]
fn single_precision_tracks_double() {
    use gapflow::{GapSeries32, Weight32};
    let w64 = Weight::log_power(1.5).unwrap();
    let w32 = Weight32::log_power(1.5).unwrap();
    let s64 = construct_example(&w64, 3.0, 6).unwrap().series;
    let s32: GapSeries32 = GapSeries32::new(
        s64.terms().iter().map(|t| gapflow::gapseries::Term::new(t.n, Complex::new(t.a.re as f32, t.a.im as f32))).collect(),
    )
    .unwrap();
    let (g64, g32) = (gamma_profile(&s64, &w64), gamma_profile(&s32, &w32));
    assert_eq!(g64.verdict, g32.verdict);
    assert!(((g32.gamma_sup as f64) - g64.gamma_sup).abs() < 1e-5 * g64.gamma_sup);
    for k in [1, 4, 9] {
        let (r64, r32) = (Radius::from_u(k as f64).unwrap(), Radius::from_u(k as f32).unwrap());
        let (a, b) = (eval_point(&s64, &r64, 0.7), eval_point(&s32, &r32, 0.7f32));
        assert!((b as f64 - a).abs() < 1e-4 * (1.0 + a.abs()), "{a} vs {b}");
    }
}
