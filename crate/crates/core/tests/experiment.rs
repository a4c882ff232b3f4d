mod common;

use bfrb_core::evaluation::{
    descriptive_stats_report, run_ablation_suite, run_experiment, CvStrategy, ExperimentConfig, FoldStatus,
    ModalitySubset,
};
use bfrb_core::features::Modality;
use bfrb_core::models::{ModelConfig, ModelKind};
use bfrb_core::synth::generate_dataset;
use bfrb_core::{LabelSet, Stage, WindowSpec};
use common::small_synth;

fn sessions() -> Vec<bfrb_core::SessionBundle> {
    generate_dataset(&small_synth(21, 4, 14)).unwrap()
}

fn full_length_sessions() -> Vec<bfrb_core::SessionBundle> {
    let cfg = bfrb_core::synth::SynthConfig {
        participants: 4,
        seed: 21,
        ..Default::default()
    };
    generate_dataset(&cfg).unwrap()
}

fn fast(kind: ModelKind) -> ModelConfig {
    let mut m = ModelConfig::new(kind, 3);
    m.forest.n_trees = 20;
    m.boost.n_trees = 20;
    m
}

#[test]
fn runs_are_deterministic_and_consistent() {
    let data = sessions();
    let cfg = ExperimentConfig::new(WindowSpec::SHORT, LabelSet::AllCompulsive, 9);
    for strategy in [CvStrategy::LeaveOneUserOut, CvStrategy::STRATIFIED] {
        let a = run_experiment(&data, &cfg, &fast(ModelKind::RandomForest), strategy, &ModalitySubset::all()).unwrap();
        let b = run_experiment(&data, &cfg, &fast(ModelKind::RandomForest), strategy, &ModalitySubset::all()).unwrap();
        assert_eq!(a.to_json(), b.to_json());

        let tested: usize = a.folds.iter().filter(|f| f.status != FoldStatus::SingleClassTrain).map(|f| f.n_test).sum();
        assert_eq!(a.confusion.total(), tested);
        for f in &a.folds {
            for v in [f.auc, f.recall, f.precision, f.f1].into_iter().flatten() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let auc = a.summary.auc;
        assert_eq!(auc.n_defined + auc.n_undefined, a.folds.len());
        assert!(auc.mean.is_some());
    }
}

#[test]
fn louo_reports_one_fold_per_participant() {
    let data = sessions();
    let cfg = ExperimentConfig::new(WindowSpec::SHORT, LabelSet::AllCompulsive, 1);
    let r = run_experiment(&data, &cfg, &fast(ModelKind::Logistic), CvStrategy::LeaveOneUserOut, &ModalitySubset::all())
        .unwrap();
    let ids: Vec<_> = r.folds.iter().map(|f| f.participant.clone().unwrap()).collect();
    assert_eq!(ids, ["P01", "P02", "P03", "P04"]);
    assert_eq!(r.metadata.features.len(), 28);
}

#[test]
fn ablations_restrict_features_and_share_folds() {
    let data = full_length_sessions();
    let cfg = ExperimentConfig::new(WindowSpec::LONG, LabelSet::AllCompulsive, 4);
    let mut subsets = ModalitySubset::singles();
    subsets.push("acc+gyr".parse().unwrap());
    let reports = run_ablation_suite(&data, &cfg, &fast(ModelKind::GradientBoost), CvStrategy::STRATIFIED, &subsets).unwrap();
    assert_eq!(reports.len(), 5);
    let gyr = &reports[1];
    assert!(gyr.metadata.features.iter().all(|n| n.starts_with("gyr")));
    assert_eq!(gyr.metadata.features.len(), 12);
    let heart = &reports[2];
    assert!(heart.metadata.features.iter().any(|n| n.starts_with("RMSSD")));
    assert_eq!(reports[4].metadata.ablation, ModalitySubset::all());
    assert_eq!(reports[4].metadata.features.len(), 32);
    for r in &reports {
        let tests: Vec<_> = r.folds.iter().map(|f| (f.n_train, f.n_test, f.n_test_positive)).collect();
        let first: Vec<_> = reports[0].folds.iter().map(|f| (f.n_train, f.n_test, f.n_test_positive)).collect();
        assert_eq!(tests, first);
        assert!(r.dataset.hrv_dropout.is_some());
    }
}

#[test]
fn short_window_heart_features_have_no_rmssd() {
    let data = sessions();
    let cfg = ExperimentConfig::new(WindowSpec::SHORT, LabelSet::AllCompulsive, 4);
    let r = run_experiment(
        &data,
        &cfg,
        &fast(ModelKind::Logistic),
        CvStrategy::LeaveOneUserOut,
        &ModalitySubset::single(Modality::Heart),
    )
    .unwrap();
    assert_eq!(r.metadata.features, ["HRmax", "HRmean", "HRmin", "HRstd"]);
    assert!(r.dataset.hrv_dropout.is_none());
}

#[test]
fn descriptive_report_on_synthetic_sessions() {
    let data = sessions();
    let r = descriptive_stats_report(&data);
    let total: usize = data.iter().map(|s| s.events().len()).sum();
    assert_eq!(r.total_behaviors, total);
    let shares: f64 = r.prevalence.iter().filter_map(|p| p.share).sum();
    assert!((shares - 1.0).abs() < 1e-12);
    assert!(r.prevalence.windows(2).all(|w| w[0].count >= w[1].count));
    let hr = |s: Stage| r.stages.iter().find(|x| x.stage == s).unwrap().mean_normalized_hr.unwrap();
    assert!(hr(Stage::BaselineI).abs() < 1e-9);
    assert!(hr(Stage::Task1Present) > hr(Stage::BaselineI));
    assert_eq!(r.participants.len(), 4);
    let per_stage: usize = r.stages.iter().map(|s| s.behavior_count).sum();
    assert_eq!(per_stage, total);
}
