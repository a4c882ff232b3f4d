use std::path::Path;
use std::process::{Command, Output};

use bfrb_core::synth::{generate_dataset, write_dataset, SynthConfig};

fn bfrb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfrb"))
        .args(args)
        .current_dir(cwd)
        .env_remove("BFRB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// About 11 minutes per session, so runs stay quick.
fn write_synth(root: &Path, participants: usize, events: usize) {
    let cfg = SynthConfig {
        participants,
        stage_seconds: [120, 60, 120, 60, 240, 60],
        events_per_session: events,
        seed: 4,
        ..SynthConfig::default()
    };
    write_dataset(&generate_dataset(&cfg).unwrap(), root).unwrap();
}

#[test]
fn validate_accepts_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 3, 5);
    let o = bfrb(&["validate", "data"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("3 sessions, 0 failed"), "{}", stdout(&o));
}

#[test]
fn validate_reports_out_of_order_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_synth(&data, 2, 5);
    let rec = data.join("P02").join("recording.csv");
    let mut lines: Vec<String> = std::fs::read_to_string(&rec).unwrap().lines().map(String::from).collect();
    lines.swap(10, 11);
    std::fs::write(&rec, lines.join("\n") + "\n").unwrap();

    let o = bfrb(&["validate", "data"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("NonMonotoneTimestamps"), "{out}");
    assert!(out.contains("2 sessions, 1 failed"), "{out}");
}

#[test]
fn missing_adapter_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 1, 3);
    let o = bfrb(&["validate", "data", "--adapter", "nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 2, 3);
    std::fs::write(dir.path().join("c.json"), r#"{"dataset": "data", "windw": "60x/1y"}"#).unwrap();
    let o = bfrb(&["run", "--config", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("windw"), "{}", stderr(&o));
}

#[test]
fn run_writes_identical_reports_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 3, 8);
    let args = [
        "run", "--dataset", "data", "--model", "logistic", "--seed", "7", "--output-dir", "out", "--ablation", "heart",
    ];
    let o = bfrb(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in [
        "run_config.json",
        "report_all.json",
        "report_heart.json",
        "folds_all.csv",
        "roc_all.csv",
        "roc.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let first = std::fs::read(out.join("report_all.json")).unwrap();
    let o = bfrb(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, std::fs::read(out.join("report_all.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert_eq!(report["metadata"]["run_config"]["seed"], 7);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 2, 5);
    let o = Command::new(env!("CARGO_BIN_EXE_bfrb"))
        .args(["run", "--dataset", "data", "--model", "logistic", "--output-dir", "out", "--no-plots"])
        .current_dir(dir.path())
        .env("BFRB_SEED", "31")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/run_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 31);
    assert!(!dir.path().join("out/roc.svg").exists());
}

#[test]
fn unsupported_window_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 2, 3);
    let o = bfrb(&["run", "--dataset", "data", "--window", "600x/1y"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("600x/1y"), "{}", stderr(&o));
}

#[test]
fn matrix_on_an_empty_directory_fails_with_io() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let o = bfrb(&["matrix", "--dataset", "empty", "--output-dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn stats_on_a_single_session() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 1, 6);
    let o = bfrb(&["stats", "data", "--output-dir", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["stats.json", "prevalence.csv", "stages.csv", "participants.csv"] {
        assert!(dir.path().join("s").join(f).is_file(), "missing {f}");
    }
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["sessions"], 1);
    assert_eq!(stats["total_behaviors"], 6);
}

#[test]
fn stats_without_labels_has_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_synth(&data, 1, 6);
    std::fs::write(data.join("P01/labels.csv"), "start_ms,end_ms,behavior,hand\n").unwrap();
    let o = bfrb(&["stats", "data", "--output-dir", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let prevalence = std::fs::read_to_string(dir.path().join("s/prevalence.csv")).unwrap();
    let rows: Vec<&str> = prevalence.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.ends_with(",0,")), "{prevalence}");
}

#[test]
fn featurize_writes_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(&dir.path().join("data"), 2, 5);
    let o = bfrb(&["featurize", "--dataset", "data", "--out", "f.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 28 + 4);
    assert_eq!(&header[28..], ["label", "participant", "behavior", "clean"]);
    assert!(dir.path().join("f.json").is_file());
}

#[test]
fn synth_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = bfrb(&["synth", "--out", "d", "--participants", "2", "--events", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = bfrb(&["validate", "d"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
