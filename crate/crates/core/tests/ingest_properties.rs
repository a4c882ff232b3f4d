mod common;

use bfrb_core::ingest::{
    load_dataset, read_labels, write_labels, Adapter, IngestError, LABELS_FILE, RECORDING_FILE,
};
use bfrb_core::synth::{generate_dataset, write_dataset};
use common::small_synth;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dataset_round_trips_through_csv(seed in any::<u64>(), events in 0usize..10) {
        let sessions = generate_dataset(&small_synth(seed, 2, events)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&sessions, dir.path()).unwrap();
        let loaded = load_dataset(dir.path(), &Adapter::default()).unwrap();
        prop_assert_eq!(loaded, sessions);
    }

    #[test]
    fn label_row_order_is_irrelevant(seed in any::<u64>()) {
        let sessions = generate_dataset(&small_synth(seed, 1, 12)).unwrap();
        let mut buf = Vec::new();
        write_labels(sessions[0].events(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        lines.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let parsed = read_labels(shuffled.as_bytes(), &Adapter::default()).unwrap();
        prop_assert_eq!(parsed.as_slice(), sessions[0].events());
    }
}

#[test]
fn shuffled_timestamps_are_rejected() {
    let sessions = generate_dataset(&small_synth(3, 1, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&sessions, dir.path()).unwrap();
    let path = dir.path().join("P01").join(RECORDING_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(10, 11);
    std::fs::write(&path, lines.join("\n")).unwrap();
    let err = load_dataset(dir.path(), &Adapter::default()).unwrap_err();
    assert!(matches!(err, IngestError::NonMonotoneTimestamps(10)), "{err}");
}

#[test]
fn missing_labels_file_is_io() {
    let sessions = generate_dataset(&small_synth(3, 1, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&sessions, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("P01").join(LABELS_FILE)).unwrap();
    let err = load_dataset(dir.path(), &Adapter::default()).unwrap_err();
    assert!(err.is_io(), "{err}");
}
