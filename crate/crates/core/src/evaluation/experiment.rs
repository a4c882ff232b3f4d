//! Experiment orchestration: sessions to feature vectors, fold plans to
//! trained models, fold scores to an aggregated report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::folds::{plan_folds, CvStrategy, Fold, FoldError, FoldPlan};
use super::metrics::{self, Confusion, MetricError, RocPoint, DEFAULT_THRESHOLD};
use super::ModalitySubset;
use crate::features::{
    featurize_dataset, hrv_validity_filter, DropoutReport, ExclusionReport, FeatureConfig, FeatureDataset,
    FeatureError, FeatureSchema, DEFAULT_HRV_THRESHOLD,
};
use crate::ingest::SessionBundle;
use crate::models::{self, FeatureImportanceReport, ModelConfig, ModelError};
use crate::preprocess::{prepare_session, PreparedSession, PreprocessError};
use crate::util::mix_seed;
use crate::windowing::{build_dataset, DatasetOptions, LabelSet, SkipReport, WindowError, WindowSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("session `{participant}`: {source}")]
    Preprocess {
        participant: String,
        #[source]
        source: PreprocessError,
    },
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error("fold {fold}: {source}")]
    Model {
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error("fold {fold}: {source}")]
    Metric {
        fold: usize,
        #[source]
        source: MetricError,
    },
    #[error("modality subset `{0}` selects no features")]
    EmptySubset(String),
    #[error("no feature vectors left to evaluate")]
    NoVectors,
}

/// Everything that determines the feature dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub window: WindowSpec,
    pub labels: LabelSet,
    #[serde(default)]
    pub dataset: DatasetOptions,
    #[serde(default)]
    pub features: FeatureConfig,
    /// Minimum heart-rate validity for windows that carry HRV features.
    /// `None` keeps every window.
    #[serde(default = "default_hrv_threshold")]
    pub hrv_threshold: Option<f64>,
    /// Seeds negative sampling and fold planning.
    #[serde(default)]
    pub seed: u64,
}

fn default_hrv_threshold() -> Option<f64> {
    Some(DEFAULT_HRV_THRESHOLD)
}

impl ExperimentConfig {
    pub fn new(window: WindowSpec, labels: LabelSet, seed: u64) -> Self {
        ExperimentConfig {
            window,
            labels,
            dataset: DatasetOptions::default(),
            features: FeatureConfig::default(),
            hrv_threshold: default_hrv_threshold(),
            seed,
        }
    }
}

/// Counts describing how the feature dataset was formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub sessions: usize,
    pub participants: Vec<String>,
    pub windows_positive: usize,
    pub windows_negative: usize,
    pub skipped_events: SkipReport,
    pub exclusions: ExclusionReport,
    /// Present when the heart-rate validity filter ran.
    pub hrv_dropout: Option<DropoutReport>,
    pub vectors: usize,
    pub vectors_positive: usize,
}

#[derive(Debug, Clone)]
pub struct PreparedFeatures {
    pub config: ExperimentConfig,
    pub dataset: FeatureDataset,
    pub summary: DatasetSummary,
}

impl PreparedFeatures {
    pub fn groups(&self) -> Vec<String> {
        self.dataset.vectors.iter().map(|v| v.meta.participant_id.clone()).collect()
    }

    pub fn plan(&self, strategy: CvStrategy) -> Result<FoldPlan, FoldError> {
        plan_folds(&self.groups(), strategy, self.config.seed)
    }
}

pub fn prepare_sessions(bundles: &[SessionBundle]) -> Result<Vec<PreparedSession>, ExperimentError> {
    bundles
        .par_iter()
        .map(|b| {
            prepare_session(b).map_err(|source| ExperimentError::Preprocess {
                participant: b.participant_id().to_string(),
                source,
            })
        })
        .collect()
}

/// Windows, featurizes and (for HRV windows) filters by heart-rate validity.
pub fn prepare_features(bundles: &[SessionBundle], config: &ExperimentConfig) -> Result<PreparedFeatures, ExperimentError> {
    let sessions = prepare_sessions(bundles)?;
    let windows = build_dataset(bundles, config.window, &config.labels, config.seed, config.dataset)?;
    let (dataset, exclusions) = featurize_dataset(&windows, &sessions, config.features)?;
    let (dataset, hrv_dropout) = match config.hrv_threshold {
        Some(t) if config.window.has_hrv() => {
            let (d, r) = hrv_validity_filter(dataset, t);
            (d, Some(r))
        }
        _ => (dataset, None),
    };
    let summary = DatasetSummary {
        sessions: bundles.len(),
        participants: dataset.participants(),
        windows_positive: windows.n_positive(),
        windows_negative: windows.n_negative(),
        skipped_events: windows.skipped,
        exclusions,
        hrv_dropout,
        vectors: dataset.vectors.len(),
        vectors_positive: dataset.n_positive(),
    };
    Ok(PreparedFeatures {
        config: config.clone(),
        dataset,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldStatus {
    Complete,
    /// Test set holds one class only, so AUC (and, without positives,
    /// recall and F1) is undefined.
    SingleClassTest,
    /// Training set holds one class only; the fold is not scored.
    SingleClassTrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub index: usize,
    pub participant: Option<String>,
    pub iteration: Option<usize>,
    pub model_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_test_positive: usize,
    pub auc: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: Confusion,
    pub status: FoldStatus,
}

/// Mean and sample standard deviation over folds where the metric is
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_defined: usize,
    pub n_undefined: usize,
}

impl MetricSummary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut defined = Vec::new();
        let mut n_undefined = 0;
        for v in values {
            match v {
                Some(x) => defined.push(x),
                None => n_undefined += 1,
            }
        }
        let n = defined.len();
        let mean = (n > 0).then(|| defined.iter().sum::<f64>() / n as f64);
        let std = mean.filter(|_| n > 1).map(|m| {
            let ss: f64 = defined.iter().map(|x| (x - m) * (x - m)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        MetricSummary {
            mean,
            std,
            n_defined: n,
            n_undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub auc: MetricSummary,
    pub recall: MetricSummary,
    pub precision: MetricSummary,
    pub f1: MetricSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Negative sampling.
    pub windows: u64,
    pub folds: u64,
    /// Base model seed; fold `k` trains with a seed derived from `(model, k)`.
    pub model: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub window: WindowSpec,
    pub labels: LabelSet,
    pub dataset_options: DatasetOptions,
    pub feature_config: FeatureConfig,
    pub hrv_threshold: Option<f64>,
    pub model: ModelConfig,
    pub strategy: CvStrategy,
    pub ablation: ModalitySubset,
    pub features: Vec<String>,
    pub schema_fingerprint: String,
    pub threshold: f64,
    pub seeds: Seeds,
    /// Caller-supplied run configuration, embedded verbatim.
    #[serde(default)]
    pub run_config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub dataset: DatasetSummary,
    pub folds: Vec<FoldResult>,
    pub summary: ReportSummary,
    /// Summed over scored folds.
    pub confusion: Confusion,
    /// ROC over the pooled out-of-fold scores; empty when the pool holds a
    /// single class.
    pub roc: Vec<RocPoint>,
    /// Mean over scored folds.
    pub importances: Option<FeatureImportanceReport>,
}

struct FoldOutcome {
    result: FoldResult,
    scores: Vec<f64>,
    labels: Vec<u8>,
    importances: Option<FeatureImportanceReport>,
}

fn run_fold(
    prepared: &PreparedFeatures,
    schema: &FeatureSchema,
    model: &ModelConfig,
    fold: &Fold,
) -> Result<FoldOutcome, ExperimentError> {
    let (x_train, y_train) = prepared.dataset.matrix(schema, &fold.train);
    let (x_test, y_test) = prepared.dataset.matrix(schema, &fold.test);
    let model_seed = mix_seed(model.seed, fold.index as u64);
    let n_test_positive = y_test.iter().filter(|&&y| y == 1).count();
    let mut result = FoldResult {
        index: fold.index,
        participant: fold.participant.clone(),
        iteration: fold.iteration,
        model_seed,
        n_train: fold.train.len(),
        n_test: fold.test.len(),
        n_test_positive,
        auc: None,
        recall: None,
        precision: None,
        f1: None,
        confusion: Confusion::default(),
        status: FoldStatus::Complete,
    };

    let train_pos = y_train.iter().filter(|&&y| y == 1).count();
    if train_pos == 0 || train_pos == y_train.len() {
        result.status = FoldStatus::SingleClassTrain;
        return Ok(FoldOutcome {
            result,
            scores: Vec::new(),
            labels: Vec::new(),
            importances: None,
        });
    }

    let mut cfg = model.clone();
    cfg.seed = model_seed;
    let trained = models::train(&cfg, &x_train, &y_train).map_err(|source| ExperimentError::Model {
        fold: fold.index,
        source,
    })?;
    let scores = models::predict_scores(&trained, &x_test).map_err(|source| ExperimentError::Model {
        fold: fold.index,
        source,
    })?;
    let metric_err = |source| ExperimentError::Metric {
        fold: fold.index,
        source,
    };

    result.confusion = Confusion::from_scores(&scores, &y_test, DEFAULT_THRESHOLD);
    if n_test_positive > 0 {
        let m = metrics::recall_f1_confusion(&scores, &y_test, DEFAULT_THRESHOLD).map_err(metric_err)?;
        result.recall = Some(m.recall);
        result.precision = Some(m.precision);
        result.f1 = Some(m.f1);
    }
    if n_test_positive > 0 && n_test_positive < y_test.len() {
        result.auc = Some(metrics::auc(&scores, &y_test).map_err(metric_err)?);
    } else {
        result.status = FoldStatus::SingleClassTest;
    }
    Ok(FoldOutcome {
        result,
        scores,
        labels: y_test,
        importances: Some(models::feature_importances(&trained)),
    })
}

/// Trains and scores one model per fold on the features of `ablation`.
/// Folds run in parallel; results are merged in fold order.
pub fn evaluate(
    prepared: &PreparedFeatures,
    model: &ModelConfig,
    plan: &FoldPlan,
    ablation: &ModalitySubset,
) -> Result<EvalReport, ExperimentError> {
    if prepared.dataset.vectors.is_empty() {
        return Err(ExperimentError::NoVectors);
    }
    let schema = prepared.dataset.schema.restrict(&ablation.modalities());
    if schema.is_empty() {
        return Err(ExperimentError::EmptySubset(ablation.to_string()));
    }
    model
        .validate()
        .map_err(|source| ExperimentError::Model { fold: 0, source })?;

    let outcomes = plan
        .folds
        .par_iter()
        .map(|f| run_fold(prepared, &schema, model, f))
        .collect::<Result<Vec<_>, _>>()?;

    let mut confusion = Confusion::default();
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut fold_importances = Vec::new();
    let mut folds = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        confusion.add(o.result.confusion);
        pooled_scores.extend(o.scores);
        pooled_labels.extend(o.labels);
        fold_importances.extend(o.importances);
        folds.push(o.result);
    }
    let roc = metrics::roc_points(&pooled_scores, &pooled_labels).unwrap_or_default();
    let summary = ReportSummary {
        auc: MetricSummary::of(folds.iter().map(|f| f.auc)),
        recall: MetricSummary::of(folds.iter().map(|f| f.recall)),
        precision: MetricSummary::of(folds.iter().map(|f| f.precision)),
        f1: MetricSummary::of(folds.iter().map(|f| f.f1)),
    };
    let config = &prepared.config;
    Ok(EvalReport {
        metadata: ReportMetadata {
            window: config.window,
            labels: config.labels.clone(),
            dataset_options: config.dataset,
            feature_config: config.features,
            hrv_threshold: config.hrv_threshold,
            model: model.clone(),
            strategy: plan.strategy,
            ablation: ablation.clone(),
            features: schema.names().to_vec(),
            schema_fingerprint: schema.fingerprint(),
            threshold: DEFAULT_THRESHOLD,
            seeds: Seeds {
                windows: config.seed,
                folds: plan.seed,
                model: model.seed,
            },
            run_config: serde_json::Value::Null,
        },
        dataset: prepared.summary.clone(),
        folds,
        summary,
        confusion,
        roc,
        importances: FeatureImportanceReport::average(&fold_importances),
    })
}

pub fn run_experiment(
    bundles: &[SessionBundle],
    config: &ExperimentConfig,
    model: &ModelConfig,
    strategy: CvStrategy,
    ablation: &ModalitySubset,
) -> Result<EvalReport, ExperimentError> {
    let prepared = prepare_features(bundles, config)?;
    let plan = prepared.plan(strategy)?;
    evaluate(&prepared, model, &plan, ablation)
}

/// One report per subset, plus all modalities when not already requested.
/// Every report uses the same fold plan.
pub fn run_ablation_suite(
    bundles: &[SessionBundle],
    config: &ExperimentConfig,
    model: &ModelConfig,
    strategy: CvStrategy,
    subsets: &[ModalitySubset],
) -> Result<Vec<EvalReport>, ExperimentError> {
    let prepared = prepare_features(bundles, config)?;
    let plan = prepared.plan(strategy)?;
    let mut subsets = subsets.to_vec();
    if !subsets.iter().any(ModalitySubset::is_all) {
        subsets.push(ModalitySubset::all());
    }
    subsets.iter().map(|s| evaluate(&prepared, model, &plan, s)).collect()
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per fold.
    pub fn write_folds_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "fold",
            "participant",
            "iteration",
            "n_train",
            "n_test",
            "n_test_positive",
            "auc",
            "recall",
            "precision",
            "f1",
            "tp",
            "fp",
            "tn",
            "fn",
            "status",
        ])?;
        for f in &self.folds {
            let status = match f.status {
                FoldStatus::Complete => "complete",
                FoldStatus::SingleClassTest => "single_class_test",
                FoldStatus::SingleClassTrain => "single_class_train",
            };
            w.write_record([
                f.index.to_string(),
                f.participant.clone().unwrap_or_default(),
                f.iteration.map(|i| i.to_string()).unwrap_or_default(),
                f.n_train.to_string(),
                f.n_test.to_string(),
                f.n_test_positive.to_string(),
                opt(f.auc),
                opt(f.recall),
                opt(f.precision),
                opt(f.f1),
                f.confusion.tp.to_string(),
                f.confusion.fp.to_string(),
                f.confusion.tn.to_string(),
                f.confusion.fn_.to_string(),
                status.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_roc_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        metrics::write_roc_csv(&self.roc, out)
    }
}
