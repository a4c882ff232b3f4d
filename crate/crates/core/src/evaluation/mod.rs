//! Cross-validated evaluation: fold plans, metrics, experiments and
//! descriptive statistics.

pub mod experiment;
pub mod folds;
pub mod metrics;
pub mod stats;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::Modality;

pub use experiment::{
    evaluate, prepare_features, run_ablation_suite, run_experiment, EvalReport, ExperimentConfig, ExperimentError,
    FoldResult, FoldStatus, MetricSummary, PreparedFeatures,
};
pub use folds::{plan_folds, CvStrategy, Fold, FoldError, FoldPlan};
pub use metrics::{auc, recall_f1_confusion, roc_points, Confusion, MetricError, RocPoint, ThresholdMetrics};
pub use stats::{descriptive_stats_report, DescriptiveReport};

/// Non-empty set of sensor modalities whose features a model may use.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModalitySubset(BTreeSet<Modality>);

impl ModalitySubset {
    pub fn new(modalities: impl IntoIterator<Item = Modality>) -> Result<Self, String> {
        let set: BTreeSet<Modality> = modalities.into_iter().collect();
        if set.is_empty() {
            return Err("modality subset must not be empty".into());
        }
        Ok(ModalitySubset(set))
    }

    pub fn all() -> Self {
        ModalitySubset(Modality::ALL.into_iter().collect())
    }

    pub fn single(m: Modality) -> Self {
        ModalitySubset(BTreeSet::from([m]))
    }

    /// Each modality alone, in accelerometer, gyroscope, heart order.
    pub fn singles() -> Vec<ModalitySubset> {
        Modality::ALL.into_iter().map(ModalitySubset::single).collect()
    }

    pub fn is_all(&self) -> bool {
        self.0.len() == Modality::ALL.len()
    }

    pub fn modalities(&self) -> Vec<Modality> {
        self.0.iter().copied().collect()
    }
}

fn short_name(m: Modality) -> &'static str {
    match m {
        Modality::Accelerometer => "acc",
        Modality::Gyroscope => "gyr",
        Modality::Heart => "heart",
    }
}

impl fmt::Display for ModalitySubset {
    /// `all`, or short names joined by `+` (`acc+gyr`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("all");
        }
        let names: Vec<_> = self.0.iter().map(|m| short_name(*m)).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for ModalitySubset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(ModalitySubset::all());
        }
        let parts = s
            .split(['+', ','])
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Modality>, _>>()?;
        ModalitySubset::new(parts)
    }
}

impl TryFrom<String> for ModalitySubset {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ModalitySubset> for String {
    fn from(m: ModalitySubset) -> String {
        m.to_string()
    }
}
