mod common;

use bfrb_core::evaluation::metrics::{auc, recall_f1_confusion, roc_points, trapezoid_area, MetricError};
use common::brute_force_auc;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scores on a coarse grid so ties are common, labels with both classes.
fn scored_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max_n)
        .prop_flat_map(|n| (prop::collection::vec(0u32..20, n), prop::collection::vec(0u8..2, n)))
        .prop_map(|(s, mut l)| {
            l[0] = 1;
            l[1] = 0;
            (s.into_iter().map(|v| f64::from(v) / 19.0).collect(), l)
        })
}

fn distinct_scores(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    scored_labels(max_n).prop_map(|(s, l)| {
        // break ties by position
        let s = s.iter().enumerate().map(|(i, v)| v + i as f64 * 1e-6).collect();
        (s, l)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn auc_equals_pair_counting((s, l) in scored_labels(200)) {
        prop_assert_eq!(auc(&s, &l).unwrap(), brute_force_auc(&s, &l));
    }

    #[test]
    fn auc_of_inverted_scores((s, l) in distinct_scores(120)) {
        let inv: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        prop_assert!((auc(&inv, &l).unwrap() - (1.0 - auc(&s, &l).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_transforms((s, l) in scored_labels(120)) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auc(&t, &l).unwrap(), auc(&s, &l).unwrap());
    }

    #[test]
    fn roc_is_monotone_and_integrates_to_auc((s, l) in distinct_scores(120)) {
        let pts = roc_points(&s, &l).unwrap();
        prop_assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 0.0));
        let last = pts.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        prop_assert!((trapezoid_area(&pts) - auc(&s, &l).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn threshold_metrics_are_bounded((s, l) in scored_labels(80)) {
        let m = recall_f1_confusion(&s, &l, 0.5).unwrap();
        for v in [m.recall, m.precision, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(m.confusion.total(), s.len());
    }
}

#[test]
fn all_equal_scores_give_one_half() {
    for n in 2..50 {
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0 || i == 1)).collect();
        let labels: Vec<u8> = labels.iter().enumerate().map(|(i, &v)| if i == 1 { 0 } else { v }).collect();
        assert_eq!(auc(&vec![0.7; n], &labels).unwrap(), 0.5);
    }
}

#[test]
fn random_scores_are_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let scores: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
    let labels: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..2)).collect();
    let a = auc(&scores, &labels).unwrap();
    assert!((0.4..=0.6).contains(&a), "{a}");
    let area = trapezoid_area(&roc_points(&scores, &labels).unwrap());
    assert!((0.4..=0.6).contains(&area));
}

#[test]
fn single_class_is_rejected() {
    assert_eq!(auc(&[0.1, 0.9], &[0, 0]), Err(MetricError::SingleClassLabels));
    assert!(roc_points(&[0.1, 0.9], &[1, 1]).is_err());
}
