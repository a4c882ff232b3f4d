//! Per-window feature vectors.
//!
//! Each channel contributes `mean`, `std`, `min` and `max` over the x-span of
//! the normalized session, named `<sensor><stat>` (`accXstd`, `HRmean`).
//! Five-minute windows add RMSSD statistics over their 60 s sub-segments.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Behavior, Channel};
use crate::models::FeatureMatrix;
use crate::preprocess::{derive_rr_intervals, PreparedSession, RrSeries, RMSSD_SEGMENT_MS};
use crate::util::names_fingerprint;
use crate::windowing::{WindowDataset, WindowInstance, WindowSpec};

pub const STAT_NAMES: [&str; 4] = ["mean", "std", "min", "max"];
pub const RMSSD_PREFIX: &str = "RMSSD";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("no samples for channel {0} in the window")]
    EmptyChannel(String),
    #[error("RMSSD needs at least 2 intervals, got {0}")]
    InsufficientData(usize),
    #[error("feature {0} unavailable for this window")]
    FeatureUnavailable(String),
    #[error("no prepared session for participant `{0}`")]
    UnknownParticipant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl DescriptiveStats {
    fn as_array(&self) -> [f64; 4] {
        [self.mean, self.std, self.min, self.max]
    }
}

/// Mean, population std, min and max. A single sample has std 0.
pub fn descriptive_stats(values: &[f64]) -> Result<DescriptiveStats, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyChannel(String::new()));
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if min == max {
        return Ok(DescriptiveStats {
            mean: min,
            std: 0.0,
            min,
            max,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    // Summation rounding can push the mean a hair outside [min, max].
    Ok(DescriptiveStats {
        mean: mean.clamp(min, max),
        std,
        min,
        max,
    })
}

/// Root mean square of successive interval differences, in ms:
/// `sqrt(sum_{i=1}^{n-1} (RR_i - RR_{i+1})^2 / (n - 1))`.
pub fn rmssd(rr: &RrSeries) -> Result<f64, FeatureError> {
    rmssd_of(&rr.intervals_ms)
}

pub fn rmssd_of(intervals_ms: &[f64]) -> Result<f64, FeatureError> {
    let n = intervals_ms.len();
    if n < 2 {
        return Err(FeatureError::InsufficientData(n));
    }
    let sum_sq: f64 = intervals_ms
        .windows(2)
        .map(|w| {
            let d = w[0] - w[1];
            d * d
        })
        .sum();
    Ok((sum_sq / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmssdMode {
    /// mean/std/min/max of RMSSD over consecutive 60 s sub-segments.
    #[default]
    SubSegments,
    /// One RMSSD value over the whole x-span.
    Single,
}

impl FromStr for RmssdMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sub_segments" | "sub-segments" | "segments" => Ok(RmssdMode::SubSegments),
            "single" => Ok(RmssdMode::Single),
            _ => Err(format!("unknown rmssd mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub rmssd_mode: RmssdMode,
}

/// Sensor family a feature belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Accelerometer,
    Gyroscope,
    Heart,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Accelerometer, Modality::Gyroscope, Modality::Heart];

    pub fn of_feature(name: &str) -> Option<Modality> {
        if name.starts_with("acc") {
            Some(Modality::Accelerometer)
        } else if name.starts_with("gyr") {
            Some(Modality::Gyroscope)
        } else if name.starts_with("HR") || name.starts_with(RMSSD_PREFIX) {
            Some(Modality::Heart)
        } else {
            None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Accelerometer => "accelerometer",
            Modality::Gyroscope => "gyroscope",
            Modality::Heart => "heart",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "acc" | "accelerometer" => Ok(Modality::Accelerometer),
            "gyr" | "gyro" | "gyroscope" => Ok(Modality::Gyroscope),
            "heart" | "hr" => Ok(Modality::Heart),
            other => Err(format!("unknown modality `{other}`")),
        }
    }
}

/// Alphabetically ordered feature names for one window spec.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl FeatureSchema {
    pub fn for_window(spec: WindowSpec, config: FeatureConfig) -> Self {
        let mut names: Vec<String> = Channel::ALL
            .iter()
            .flat_map(|c| STAT_NAMES.iter().map(move |s| format!("{}{s}", c.feature_prefix())))
            .collect();
        if spec.has_hrv() {
            match config.rmssd_mode {
                RmssdMode::SubSegments => {
                    names.extend(STAT_NAMES.iter().map(|s| format!("{RMSSD_PREFIX}{s}")))
                }
                RmssdMode::Single => names.push(RMSSD_PREFIX.to_string()),
            }
        }
        FeatureSchema::from_names(names)
    }

    pub fn from_names(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        FeatureSchema { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Stable hex digest of the ordered names.
    pub fn fingerprint(&self) -> String {
        names_fingerprint(&self.names)
    }

    pub fn restrict(&self, modalities: &[Modality]) -> FeatureSchema {
        FeatureSchema {
            names: self
                .names
                .iter()
                .filter(|n| Modality::of_feature(n).is_some_and(|m| modalities.contains(&m)))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub participant_id: String,
    pub anchor_ms: i64,
    pub behavior: Option<Behavior>,
    pub clean: bool,
    pub hr_validity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: BTreeMap<String, f64>,
    /// 1 for positive windows.
    pub label: u8,
    pub meta: WindowMeta,
}

fn stats_into(values: &mut BTreeMap<String, f64>, prefix: &str, stats: DescriptiveStats) {
    for (name, v) in STAT_NAMES.iter().zip(stats.as_array()) {
        values.insert(format!("{prefix}{name}"), v);
    }
}

/// Feature vector for one window. Motion and heart-rate statistics come from
/// the normalized session; RMSSD is computed from raw heart rate and then
/// z-scored against the Baseline I RMSSD reference.
pub fn featurize(
    window: &WindowInstance,
    session: &PreparedSession,
    spec: WindowSpec,
    config: FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let (start, end) = window.x_span;
    let norm = session.normalized.recording().slice(start, end);
    let mut values = BTreeMap::new();

    for ch in Channel::ALL {
        let series: Vec<f64> = norm.iter().filter_map(|s| s.value(ch)).collect();
        let stats = descriptive_stats(&series).map_err(|_| {
            if ch == Channel::Hr {
                FeatureError::FeatureUnavailable(ch.feature_prefix().into())
            } else {
                FeatureError::EmptyChannel(ch.column().into())
            }
        })?;
        stats_into(&mut values, ch.feature_prefix(), stats);
    }

    if spec.has_hrv() {
        let unavailable = || FeatureError::FeatureUnavailable(RMSSD_PREFIX.into());
        let reference = session.stats.rmssd.ok_or_else(unavailable)?;
        let raw = session.raw.recording();
        let segment_rmssd = |a: i64, b: i64| -> Result<f64, FeatureError> {
            let rr = derive_rr_intervals(raw.slice(a, b), a, b).map_err(|_| unavailable())?;
            rmssd(&rr).map(|v| reference.z(v)).map_err(|_| unavailable())
        };
        match config.rmssd_mode {
            RmssdMode::SubSegments => {
                let mut per_segment = Vec::new();
                let mut a = start;
                while a + RMSSD_SEGMENT_MS <= end {
                    per_segment.push(segment_rmssd(a, a + RMSSD_SEGMENT_MS)?);
                    a += RMSSD_SEGMENT_MS;
                }
                let stats = descriptive_stats(&per_segment).map_err(|_| unavailable())?;
                stats_into(&mut values, RMSSD_PREFIX, stats);
            }
            RmssdMode::Single => {
                values.insert(RMSSD_PREFIX.to_string(), segment_rmssd(start, end)?);
            }
        }
    }

    if values.values().any(|v| !v.is_finite()) {
        return Err(FeatureError::FeatureUnavailable("non-finite".into()));
    }
    Ok(FeatureVector {
        values,
        label: u8::from(window.label.is_positive()),
        meta: WindowMeta {
            participant_id: window.participant_id.clone(),
            anchor_ms: window.anchor_ms,
            behavior: window.label.behavior(),
            clean: window.clean,
            hr_validity: window.hr_validity,
        },
    })
}

/// Windows dropped during featurization, keyed by reason.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub by_reason: BTreeMap<String, usize>,
    pub by_participant: BTreeMap<String, usize>,
}

impl ExclusionReport {
    pub fn total(&self) -> usize {
        self.by_reason.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub schema: FeatureSchema,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureDataset {
    pub fn n_positive(&self) -> usize {
        self.vectors.iter().filter(|v| v.label == 1).count()
    }

    /// Participants in order of first appearance.
    pub fn participants(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for v in &self.vectors {
            if !seen.iter().any(|p| *p == v.meta.participant_id) {
                seen.push(v.meta.participant_id.clone());
            }
        }
        seen
    }

    /// Design matrix over `schema` (which must be a subset of this
    /// dataset's schema) for the given rows.
    pub fn matrix(&self, schema: &FeatureSchema, rows: &[usize]) -> (FeatureMatrix, Vec<u8>) {
        let data = rows
            .iter()
            .map(|&i| {
                let v = &self.vectors[i];
                schema.names().iter().map(|n| v.values[n]).collect()
            })
            .collect();
        let labels = rows.iter().map(|&i| self.vectors[i].label).collect();
        (FeatureMatrix::new(schema.names().to_vec(), data), labels)
    }

    /// Header: feature names, then `label,participant,behavior,clean`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.schema.names().to_vec();
        header.extend(["label", "participant", "behavior", "clean"].map(String::from));
        w.write_record(&header)?;
        for v in &self.vectors {
            let mut row: Vec<String> = self
                .schema
                .names()
                .iter()
                .map(|n| format!("{:.6}", v.values[n]))
                .collect();
            row.push(v.label.to_string());
            row.push(v.meta.participant_id.clone());
            row.push(v.meta.behavior.map(|b| b.name()).unwrap_or("").to_string());
            row.push(v.meta.clean.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Featurizes every window; windows whose features cannot be computed are
/// left out and counted.
pub fn featurize_dataset(
    windows: &WindowDataset,
    sessions: &[PreparedSession],
    config: FeatureConfig,
) -> Result<(FeatureDataset, ExclusionReport), FeatureError> {
    let by_id: HashMap<&str, &PreparedSession> =
        sessions.iter().map(|s| (s.participant_id(), s)).collect();
    let results: Vec<Result<FeatureVector, FeatureError>> = windows
        .windows
        .par_iter()
        .map(|w| {
            let session = by_id
                .get(w.participant_id.as_str())
                .ok_or_else(|| FeatureError::UnknownParticipant(w.participant_id.clone()))?;
            featurize(w, session, windows.spec, config)
        })
        .collect();

    let mut vectors = Vec::new();
    let mut report = ExclusionReport::default();
    for (w, r) in windows.windows.iter().zip(results) {
        match r {
            Ok(v) => vectors.push(v),
            Err(e @ FeatureError::UnknownParticipant(_)) => return Err(e),
            Err(e) => {
                *report.by_reason.entry(e.to_string()).or_default() += 1;
                *report.by_participant.entry(w.participant_id.clone()).or_default() += 1;
            }
        }
    }
    Ok((
        FeatureDataset {
            schema: FeatureSchema::for_window(windows.spec, config),
            vectors,
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropoutReport {
    pub threshold: f64,
    pub dropped: BTreeMap<String, DropCounts>,
}

impl DropoutReport {
    pub fn total(&self) -> usize {
        self.dropped.values().map(|c| c.positive + c.negative).sum()
    }
}

pub const DEFAULT_HRV_THRESHOLD: f64 = 0.5;

/// Drops vectors whose heart-rate validity is below `threshold`.
pub fn hrv_validity_filter(dataset: FeatureDataset, threshold: f64) -> (FeatureDataset, DropoutReport) {
    let mut report = DropoutReport {
        threshold,
        dropped: BTreeMap::new(),
    };
    let FeatureDataset { schema, vectors } = dataset;
    let kept = vectors
        .into_iter()
        .filter(|v| {
            if v.meta.hr_validity < threshold {
                let c = report.dropped.entry(v.meta.participant_id.clone()).or_default();
                if v.label == 1 {
                    c.positive += 1;
                } else {
                    c.negative += 1;
                }
                false
            } else {
                true
            }
        })
        .collect();
    (FeatureDataset { schema, vectors: kept }, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_examples() {
        let s = descriptive_stats(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.as_array(), [2.0, 0.0, 2.0, 2.0]);
        let s = descriptive_stats(&[1.0, 3.0]).unwrap();
        assert_eq!(s.as_array(), [2.0, 1.0, 1.0, 3.0]);
        let s = descriptive_stats(&[4.0]).unwrap();
        assert_eq!(s.std, 0.0);
        assert!(matches!(descriptive_stats(&[]), Err(FeatureError::EmptyChannel(_))));
    }

    #[test]
    fn rmssd_examples() {
        assert_eq!(rmssd_of(&[800.0; 10]).unwrap(), 0.0);
        let v = rmssd_of(&[800.0, 810.0, 790.0]).unwrap();
        assert!((v - 250f64.sqrt()).abs() < 1e-12);
        assert!((v - 15.8114).abs() < 1e-4);
        assert_eq!(rmssd_of(&[800.0]), Err(FeatureError::InsufficientData(1)));
    }

    #[test]
    fn schema_sizes() {
        let short = FeatureSchema::for_window(WindowSpec::SHORT, FeatureConfig::default());
        assert_eq!(short.len(), 28);
        assert!(!short.names().iter().any(|n| n.starts_with("RMSSD")));
        let long = FeatureSchema::for_window(WindowSpec::LONG, FeatureConfig::default());
        assert_eq!(long.len(), 32);
        assert!(long.names().contains(&"RMSSDstd".to_string()));
        let single = FeatureSchema::for_window(
            WindowSpec::LONG,
            FeatureConfig {
                rmssd_mode: RmssdMode::Single,
            },
        );
        assert_eq!(single.len(), 29);
        let mut sorted = long.names().to_vec();
        sorted.sort();
        assert_eq!(sorted, long.names());
        assert_ne!(short.fingerprint(), long.fingerprint());
    }

    #[test]
    fn modality_grouping() {
        assert_eq!(Modality::of_feature("accXstd"), Some(Modality::Accelerometer));
        assert_eq!(Modality::of_feature("gyrZmin"), Some(Modality::Gyroscope));
        assert_eq!(Modality::of_feature("HRmean"), Some(Modality::Heart));
        assert_eq!(Modality::of_feature("RMSSDmax"), Some(Modality::Heart));
        let long = FeatureSchema::for_window(WindowSpec::LONG, FeatureConfig::default());
        let gyr = long.restrict(&[Modality::Gyroscope]);
        assert_eq!(gyr.len(), 12);
        assert!(gyr.names().iter().all(|n| n.starts_with("gyr")));
        let sizes: usize = Modality::ALL.iter().map(|m| long.restrict(&[*m]).len()).sum();
        assert_eq!(sizes, long.len());
    }

    fn vector(participant: &str, label: u8, validity: f64) -> FeatureVector {
        FeatureVector {
            values: BTreeMap::new(),
            label,
            meta: WindowMeta {
                participant_id: participant.into(),
                anchor_ms: 0,
                behavior: None,
                clean: true,
                hr_validity: validity,
            },
        }
    }

    #[test]
    fn validity_filter() {
        let schema = FeatureSchema::from_names(vec![]);
        let mut vectors: Vec<_> = (0..11).map(|_| vector("P3", 1, 0.3)).collect();
        vectors.extend((0..5).map(|_| vector("P1", 1, 1.0)));
        vectors.extend((0..16).map(|_| vector("P1", 0, 0.9)));
        let ds = FeatureDataset { schema, vectors };

        let (kept, report) = hrv_validity_filter(ds.clone(), 0.5);
        assert_eq!(kept.vectors.len(), 21);
        assert_eq!(report.total(), 11);
        assert_eq!(report.dropped["P3"], DropCounts { positive: 11, negative: 0 });

        let (kept, report) = hrv_validity_filter(ds.clone(), 0.0);
        assert_eq!(kept, ds);
        assert_eq!(report.total(), 0);
    }
}
