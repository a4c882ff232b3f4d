//! Run configuration: the JSON file schema, command-line overrides, and
//! resolution into pipeline parameters.

use std::path::{Path, PathBuf};

use bfrb_core::evaluation::{CvStrategy, ExperimentConfig, ModalitySubset};
use bfrb_core::features::{FeatureConfig, RmssdMode, DEFAULT_HRV_THRESHOLD};
use bfrb_core::models::{BoostParams, ForestParams, LogisticParams, ModelConfig, ModelKind};
use bfrb_core::windowing::{Balance, DatasetOptions};
use bfrb_core::{LabelSet, WindowSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable consulted when no seed is configured.
pub const SEED_ENV: &str = "BFRB_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<String>,
    pub logistic: LogisticParams,
    pub forest: ForestParams,
    pub boost: BoostParams,
}

/// Cross-validation strategy, either by name (`louo`, `stratified`) or in
/// full form (`{"type": "participant_stratified", "test_fraction": 0.2,
/// "iterations": 10}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CvSetting {
    Name(String),
    Full(CvStrategy),
}

/// The config file. Every key is optional; the command line wins over the
/// file, and the file over the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub adapter: Option<PathBuf>,
    /// `60x/1y` style.
    pub window: Option<String>,
    pub label_set: Option<String>,
    pub model: ModelSection,
    pub cv: Option<CvSetting>,
    /// Modality subsets evaluated in addition to all modalities.
    pub ablations: Vec<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub clean_only: Option<bool>,
    pub balance: Option<Balance>,
    pub rmssd_mode: Option<RmssdMode>,
    /// `null` disables the heart-rate validity filter.
    #[serde(deserialize_with = "present_or_null")]
    pub hrv_threshold: Option<Option<f64>>,
    pub plots: Option<bool>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Tells an explicit `null` (`Some(None)`) apart from an absent key (`None`,
/// via `#[serde(default)]`).
fn present_or_null<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root (one directory per participant)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Adapter JSON mapping source columns and names
    #[arg(long)]
    pub adapter: Option<PathBuf>,
    /// Window spec such as 60x/1y
    #[arg(long)]
    pub window: Option<String>,
    /// all-compulsive, face-touching, skin-picking or custom:<a>,<b>
    #[arg(long)]
    pub labels: Option<String>,
    /// logistic, random_forest or gradient_boost
    #[arg(long)]
    pub model: Option<String>,
    /// louo or stratified
    #[arg(long)]
    pub cv: Option<String>,
    /// Extra modality subset, e.g. acc, gyr+heart (repeatable)
    #[arg(long = "ablation")]
    pub ablations: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Keep only positives with a behavior-free x-span
    #[arg(long)]
    pub clean_only: bool,
    /// per_session or aggregate
    #[arg(long)]
    pub balance: Option<String>,
    /// sub_segments or single
    #[arg(long)]
    pub rmssd: Option<String>,
    #[arg(long)]
    pub hrv_threshold: Option<f64>,
    /// Keep every window regardless of heart-rate validity
    #[arg(long, conflicts_with = "hrv_threshold")]
    pub no_hrv_filter: bool,
    /// Skip SVG output
    #[arg(long)]
    pub no_plots: bool,
}

/// Fully resolved settings. Serialized into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub dataset: PathBuf,
    pub adapter: Option<PathBuf>,
    pub window: WindowSpec,
    pub label_set: LabelSet,
    pub model: ModelConfig,
    pub cv: CvStrategy,
    pub ablations: Vec<ModalitySubset>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub clean_only: bool,
    pub balance: Balance,
    pub rmssd_mode: RmssdMode,
    pub hrv_threshold: Option<f64>,
    pub plots: bool,
}

impl ResolvedConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            window: self.window,
            labels: self.label_set.clone(),
            dataset: DatasetOptions {
                clean_only: self.clean_only,
                balance: self.balance,
            },
            features: FeatureConfig {
                rmssd_mode: self.rmssd_mode,
            },
            hrv_threshold: self.hrv_threshold,
            seed: self.seed,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn parse_with<T, E: std::fmt::Display>(
    what: &str,
    s: &str,
    f: impl FnOnce(&str) -> Result<T, E>,
) -> Result<T, CliError> {
    f(s).map_err(|e| CliError::Domain(format!("{what}: {e}")))
}

fn parse_serde_name<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Domain(format!("{what}: unknown value `{s}`")))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Merges the config file (if any) with command-line overrides.
pub fn resolve(overrides: &Overrides) -> Result<ResolvedConfig, CliError> {
    let file = match &overrides.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };

    let dataset = overrides
        .dataset
        .clone()
        .or(file.dataset)
        .ok_or_else(|| CliError::Config("no dataset root given (--dataset or \"dataset\")".into()))?;
    let window_text = overrides.window.clone().or(file.window).unwrap_or_else(|| "60x/1y".into());
    let window = parse_with("window", &window_text, str::parse::<WindowSpec>)?;
    let labels_text = overrides
        .labels
        .clone()
        .or(file.label_set)
        .unwrap_or_else(|| "all-compulsive".into());
    let label_set = parse_with("label set", &labels_text, str::parse::<LabelSet>)?;

    let seed = match overrides.seed.or(file.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let kind_text = overrides
        .model
        .clone()
        .or(file.model.kind)
        .unwrap_or_else(|| "random_forest".into());
    let kind = parse_with("model", &kind_text, str::parse::<ModelKind>)?;
    let model = ModelConfig {
        kind,
        seed,
        logistic: file.model.logistic,
        forest: file.model.forest,
        boost: file.model.boost,
    };
    model.validate().map_err(|e| CliError::Domain(e.to_string()))?;

    let cv = match (&overrides.cv, file.cv) {
        (Some(name), _) => parse_with("cv", name, str::parse::<CvStrategy>)?,
        (None, Some(CvSetting::Name(name))) => parse_with("cv", &name, str::parse::<CvStrategy>)?,
        (None, Some(CvSetting::Full(s))) => s,
        (None, None) => CvStrategy::LeaveOneUserOut,
    };
    let ablation_texts = if overrides.ablations.is_empty() {
        file.ablations
    } else {
        overrides.ablations.clone()
    };
    let ablations = ablation_texts
        .iter()
        .map(|s| parse_with("ablation", s, str::parse::<ModalitySubset>))
        .collect::<Result<Vec<_>, _>>()?;

    let balance = match &overrides.balance {
        Some(b) => parse_serde_name("balance", b)?,
        None => file.balance.unwrap_or_default(),
    };
    let rmssd_mode = match &overrides.rmssd {
        Some(m) => parse_with("rmssd mode", m, str::parse::<RmssdMode>)?,
        None => file.rmssd_mode.unwrap_or_default(),
    };
    let hrv_threshold = if overrides.no_hrv_filter {
        None
    } else if let Some(t) = overrides.hrv_threshold {
        Some(t)
    } else {
        file.hrv_threshold.unwrap_or(Some(DEFAULT_HRV_THRESHOLD))
    };
    if let Some(t) = hrv_threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Domain(format!("hrv threshold {t} is outside [0, 1]")));
        }
    }

    Ok(ResolvedConfig {
        dataset,
        adapter: overrides.adapter.clone().or(file.adapter),
        window,
        label_set,
        model,
        cv,
        ablations,
        seed,
        output_dir: overrides
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("bfrb-output")),
        clean_only: overrides.clean_only || file.clean_only.unwrap_or(false),
        balance,
        rmssd_mode,
        hrv_threshold,
        plots: !overrides.no_plots && file.plots.unwrap_or(true),
    })
}
