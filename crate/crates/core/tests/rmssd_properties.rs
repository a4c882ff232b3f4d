mod common;

use bfrb_core::features::{descriptive_stats, rmssd_of};
use common::direct_rmssd;
use proptest::prelude::*;

fn rr_series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(300.0f64..2000.0, 2..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_direct_formula(rr in rr_series()) {
        let expected = direct_rmssd(&rr);
        let got = rmssd_of(&rr).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(f64::MIN_POSITIVE), "{got} vs {expected}");
    }

    #[test]
    fn shift_invariant_and_scale_equivariant(rr in rr_series(), shift in -200.0f64..200.0, scale in 0.1f64..10.0) {
        let base = rmssd_of(&rr).unwrap();
        let shifted: Vec<f64> = rr.iter().map(|v| v + shift).collect();
        prop_assert!((rmssd_of(&shifted).unwrap() - base).abs() < 1e-6);
        let scaled: Vec<f64> = rr.iter().map(|v| v * scale).collect();
        prop_assert!((rmssd_of(&scaled).unwrap() - scale * base).abs() < 1e-8 * (1.0 + scale * base));
    }

    #[test]
    fn constant_series_is_exactly_zero(v in 300.0f64..2000.0, n in 2usize..200) {
        prop_assert_eq!(rmssd_of(&vec![v; n]).unwrap(), 0.0);
    }

    #[test]
    fn descriptive_stats_are_ordered(values in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        let s = descriptive_stats(&values).unwrap();
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
        let all_equal = values.iter().all(|v| *v == values[0]);
        prop_assert_eq!(s.std == 0.0, all_equal);
    }
}
