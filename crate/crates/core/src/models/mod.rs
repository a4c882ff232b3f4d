//! Binary classifiers: logistic regression, random forest and gradient
//! boosted trees, behind one [`train`] / [`predict_scores`] surface.

pub mod boost;
pub mod forest;
pub mod logistic;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Modality;
use crate::util::names_fingerprint;

pub use boost::{BoostParams, GradientBoost};
pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use logistic::{LogisticModel, LogisticParams};
pub use tree::{DecisionTree, GrowParams};

/// Serialization format of [`TrainedModel`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("feature schema mismatch: model expects {expected}, got {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("empty feature matrix")]
    EmptyInput,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {0} is not 0 or 1")]
    LabelOutOfRange(u8),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model serialization: {0}")]
    Serialization(String),
}

/// Row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == names.len()));
        FeatureMatrix { names, rows }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn fingerprint(&self) -> String {
        names_fingerprint(&self.names)
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.names.len() {
                return Err(ModelError::SchemaMismatch {
                    expected: format!("{} columns", self.names.len()),
                    found: format!("{} in row {r}", row.len()),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteFeature { row: r, col: c });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    RandomForest,
    GradientBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::RandomForest, ModelKind::GradientBoost];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoost => "gradient_boost",
        }
    }

    /// Short label used in summary tables.
    pub fn abbreviation(self) -> &'static str {
        match self {
            ModelKind::Logistic => "LR",
            ModelKind::RandomForest => "RF",
            ModelKind::GradientBoost => "GBT",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "logistic" | "lr" | "logistic_regression" => Ok(ModelKind::Logistic),
            "random_forest" | "rf" => Ok(ModelKind::RandomForest),
            "gradient_boost" | "gbt" | "gradient_boosting" => Ok(ModelKind::GradientBoost),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub logistic: LogisticParams,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub boost: BoostParams,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelConfig {
            kind,
            seed,
            logistic: LogisticParams::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.kind {
            ModelKind::Logistic => self.logistic.validate(),
            ModelKind::RandomForest => self.forest.validate(),
            ModelKind::GradientBoost => self.boost.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LogisticModel),
    RandomForest(RandomForest),
    GradientBoost(GradientBoost),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub schema_fingerprint: String,
    pub seed: u64,
    pub parameters: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.parameters {
            ModelParams::Logistic(_) => ModelKind::Logistic,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::GradientBoost(_) => ModelKind::GradientBoost,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, ModelError> {
        let model: TrainedModel =
            serde_json::from_str(text).map_err(|e| ModelError::Serialization(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Serialization(format!(
                "unsupported format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

fn check_training_input(x: &FeatureMatrix, y: &[u8]) -> Result<(), ModelError> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.n_rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(ModelError::LabelOutOfRange(bad));
    }
    x.check_finite()
}

/// Trains the configured classifier. Deterministic in `(config, x, y)`.
pub fn train(config: &ModelConfig, x: &FeatureMatrix, y: &[u8]) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    check_training_input(x, y)?;
    let parameters = match config.kind {
        ModelKind::Logistic => ModelParams::Logistic(LogisticModel::fit(x, y, config.logistic)?),
        ModelKind::RandomForest => ModelParams::RandomForest(RandomForest::fit(x, y, config.forest, config.seed)),
        ModelKind::GradientBoost => ModelParams::GradientBoost(GradientBoost::fit(x, y, config.boost)),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: x.names().to_vec(),
        schema_fingerprint: x.fingerprint(),
        seed: config.seed,
        parameters,
    })
}

/// Positive-class scores in `[0, 1]`.
pub fn predict_scores(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
    if x.fingerprint() != model.schema_fingerprint {
        return Err(ModelError::SchemaMismatch {
            expected: model.schema_fingerprint.clone(),
            found: x.fingerprint(),
        });
    }
    x.check_finite()?;
    let score = |row: &[f64]| match &model.parameters {
        ModelParams::Logistic(m) => m.predict_proba(row),
        ModelParams::RandomForest(m) => m.predict_score(row),
        ModelParams::GradientBoost(m) => m.predict_proba(row),
    };
    Ok(x.rows().iter().map(|r| score(r)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceKind {
    /// Normalized impurity decrease (sums to 1).
    ImpurityDecrease,
    /// Absolute coefficient on standardized features.
    AbsCoefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportanceReport {
    pub kind: ImportanceKind,
    /// In schema order.
    pub features: Vec<(String, f64)>,
    pub by_modality: BTreeMap<Modality, f64>,
}

impl FeatureImportanceReport {
    pub fn new(kind: ImportanceKind, features: Vec<(String, f64)>) -> Self {
        let mut by_modality = BTreeMap::new();
        for (name, v) in &features {
            if let Some(m) = Modality::of_feature(name) {
                *by_modality.entry(m).or_insert(0.0) += v;
            }
        }
        FeatureImportanceReport {
            kind,
            features,
            by_modality,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Features sorted by decreasing importance (ties by name).
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v = self.features.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Element-wise mean of reports over the same features.
    pub fn average(reports: &[FeatureImportanceReport]) -> Option<FeatureImportanceReport> {
        let first = reports.first()?;
        let n = reports.len() as f64;
        let features = first
            .features
            .iter()
            .enumerate()
            .map(|(i, (name, _))| {
                let sum: f64 = reports.iter().map(|r| r.features[i].1).sum();
                (name.clone(), sum / n)
            })
            .collect();
        Some(FeatureImportanceReport::new(first.kind, features))
    }
}

pub fn feature_importances(model: &TrainedModel) -> FeatureImportanceReport {
    let (kind, values): (ImportanceKind, Vec<f64>) = match &model.parameters {
        ModelParams::Logistic(m) => (
            ImportanceKind::AbsCoefficient,
            m.weights.iter().map(|w| w.abs()).collect(),
        ),
        ModelParams::RandomForest(m) => (ImportanceKind::ImpurityDecrease, m.importances.clone()),
        ModelParams::GradientBoost(m) => (ImportanceKind::ImpurityDecrease, m.importances.clone()),
    };
    FeatureImportanceReport::new(kind, model.feature_names.iter().cloned().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (FeatureMatrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.5, if i < 10 { -1.0 } else { 1.0 } + (i % 3) as f64 * 0.1])
            .collect();
        let y = (0..20).map(|i| u8::from(i >= 10)).collect();
        (FeatureMatrix::new(vec!["accXmean".into(), "gyrYmax".into()], rows), y)
    }

    #[test]
    fn forest_fits_separable_data() {
        let (x, y) = separable();
        let m = train(&ModelConfig::new(ModelKind::RandomForest, 1), &x, &y).unwrap();
        let scores = predict_scores(&m, &x).unwrap();
        for (s, &yi) in scores.iter().zip(&y) {
            assert_eq!(u8::from(*s >= 0.5), yi);
        }
        let imp = feature_importances(&m);
        let sum: f64 = imp.features.iter().map(|(_, v)| v).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(imp.by_modality.len(), 2);
    }

    #[test]
    fn zero_logistic_scores_half() {
        let (x, y) = separable();
        let mut m = train(&ModelConfig::new(ModelKind::Logistic, 0), &x, &y).unwrap();
        if let ModelParams::Logistic(l) = &mut m.parameters {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.intercept = 0.0;
        }
        assert!(predict_scores(&m, &x).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn schema_mismatch() {
        let (x, y) = separable();
        let m = train(&ModelConfig::new(ModelKind::GradientBoost, 0), &x, &y).unwrap();
        let other = FeatureMatrix::new(vec!["a".into(), "b".into()], x.rows().to_vec());
        assert!(matches!(predict_scores(&m, &other), Err(ModelError::SchemaMismatch { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        let (x, _) = separable();
        let cfg = ModelConfig::new(ModelKind::Logistic, 0);
        assert!(matches!(train(&cfg, &x, &[1; 20]), Err(ModelError::SingleClassInput)));
        let mut rows = x.rows().to_vec();
        rows[3][1] = f64::NAN;
        let bad = FeatureMatrix::new(x.names().to_vec(), rows);
        assert!(matches!(
            train(&cfg, &bad, &[0; 20]),
            Err(ModelError::NonFiniteFeature { row: 3, col: 1 })
        ));
        let mut cfg = cfg;
        cfg.logistic.learning_rate = -1.0;
        assert!(matches!(train(&cfg, &x, &[0; 20]), Err(ModelError::InvalidHyperparameter(_))));
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = separable();
        for kind in ModelKind::ALL {
            let m = train(&ModelConfig::new(kind, 5), &x, &y).unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(predict_scores(&back, &x).unwrap(), predict_scores(&m, &x).unwrap());
            assert_eq!(back.kind(), kind);
        }
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: ModelConfig = serde_json::from_str(r#"{"kind": "random_forest", "forest": {"n_trees": 10}}"#).unwrap();
        assert_eq!(ok.forest.n_trees, 10);
        assert_eq!(ok.forest.max_depth, 8);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"kind": "logistic", "learning_rate": 1}"#).is_err());
    }
}
