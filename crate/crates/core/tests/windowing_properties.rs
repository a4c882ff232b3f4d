mod common;

use bfrb_core::synth::generate_session;
use bfrb_core::windowing::{
    build_dataset, negative_anchors, positive_windows, Balance, DatasetOptions, WindowLabel,
};
use bfrb_core::{LabelSet, WindowSpec};
use common::small_synth;
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = WindowSpec> {
    (prop::sample::select(vec![60u32, 120, 180]), 1u32..6).prop_map(|(x, y)| WindowSpec::new(x, y).unwrap())
}

fn label_set() -> impl Strategy<Value = LabelSet> {
    prop::sample::select(LabelSet::STANDARD_SETS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dataset_invariants(seed in any::<u64>(), events in 0usize..16, spec in spec(), labels in label_set(), clean_only in any::<bool>()) {
        let session = generate_session(&small_synth(seed, 1, events), 0).unwrap();
        let options = DatasetOptions { clean_only, balance: Balance::PerSession };
        let ds = build_dataset(std::slice::from_ref(&session), spec, &labels, seed, options).unwrap();
        prop_assert_eq!(ds.n_positive(), ds.n_negative());

        for w in &ds.windows {
            prop_assert_eq!(w.x_span, (w.anchor_ms - spec.x_ms(), w.anchor_ms));
            prop_assert_eq!(w.y_span, (w.anchor_ms, w.anchor_ms + spec.y_ms()));
            prop_assert!(w.x_span.0 >= session.recording().start_ms());
            prop_assert!(w.y_span.1 <= session.recording().end_ms());
            prop_assert!((0.0..=1.0).contains(&w.hr_validity));
            match w.label {
                WindowLabel::Negative => {
                    prop_assert!(!session.events().iter().any(|e| e.overlaps(w.y_span.0, w.y_span.1)));
                }
                WindowLabel::Positive(b) => {
                    prop_assert!(labels.includes(b));
                    prop_assert!(session.events().iter().any(|e| e.start_ms == w.anchor_ms && e.behavior == b));
                    if clean_only {
                        prop_assert!(w.clean);
                    }
                    if w.clean {
                        prop_assert!(!session.events().iter().any(|e| e.overlaps(w.x_span.0, w.x_span.1)));
                    }
                }
            }
        }

        let again = build_dataset(std::slice::from_ref(&session), spec, &labels, seed, options).unwrap();
        prop_assert_eq!(&again.windows, &ds.windows);
    }

    #[test]
    fn longer_horizon_never_adds_windows(seed in any::<u64>(), events in 0usize..16, x in prop::sample::select(vec![60u32, 120])) {
        let session = generate_session(&small_synth(seed, 1, events), 0).unwrap();
        let short = WindowSpec::new(x, 1).unwrap();
        let long = WindowSpec::new(x, 3).unwrap();
        let labels = LabelSet::AllCompulsive;
        prop_assert!(positive_windows(&session, long, &labels).windows.len() <= positive_windows(&session, short, &labels).windows.len());
        let a1 = negative_anchors(&session, short);
        let a3 = negative_anchors(&session, long);
        prop_assert!(a3.iter().all(|t| a1.binary_search(t).is_ok()));
    }

    #[test]
    fn aggregate_balance_matches_totals(seed in any::<u64>(), events in 1usize..12) {
        let cfg = small_synth(seed, 3, events);
        let sessions: Vec<_> = (0..3).map(|i| generate_session(&cfg, i).unwrap()).collect();
        let options = DatasetOptions { clean_only: false, balance: Balance::Aggregate };
        let ds = build_dataset(&sessions, WindowSpec::SHORT, &LabelSet::AllCompulsive, seed, options).unwrap();
        prop_assert_eq!(ds.n_positive(), ds.n_negative());
    }
}

#[test]
fn seeds_change_negatives() {
    let session = generate_session(&small_synth(5, 1, 10), 0).unwrap();
    let build = |seed| {
        build_dataset(
            std::slice::from_ref(&session),
            WindowSpec::SHORT,
            &LabelSet::AllCompulsive,
            seed,
            DatasetOptions::default(),
        )
        .unwrap()
    };
    let (a, b) = (build(1), build(2));
    assert!(a.n_negative() > 0);
    assert_ne!(a.windows, b.windows);
}
