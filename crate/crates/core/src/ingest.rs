//! Parsing and validation of raw session files.
//!
//! A dataset root holds one directory per participant. Each directory carries
//! three canonical CSV files:
//!
//! * `recording.csv`: `timestamp_ms,accX,accY,accZ,gyrX,gyrY,gyrZ,hr`
//! * `labels.csv`: `start_ms,end_ms,behavior,hand`
//! * `stages.csv`: `stage,start_ms,end_ms`
//!
//! Files that follow another layout are mapped onto the canonical one with an
//! [`Adapter`] (column renames, unit scaling, name aliases).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RECORDING_FILE: &str = "recording.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const STAGES_FILE: &str = "stages.csv";

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid adapter config: {0}")]
    Adapter(String),
    #[error("missing channel column `{0}`")]
    MissingChannel(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("timestamps not strictly increasing at sample {0}")]
    NonMonotoneTimestamps(usize),
    #[error("recording has no samples")]
    EmptyRecording,
    #[error("unknown behavior `{0}`")]
    UnknownBehavior(String),
    #[error("unknown hand `{0}`")]
    UnknownHand(String),
    #[error("row {0}: end precedes start")]
    NegativeDuration(usize),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("row {0}: stage must have start < end")]
    EmptyStage(usize),
    #[error("stage {0} listed more than once")]
    DuplicateStage(Stage),
    #[error("stages {0} and {1} overlap")]
    OverlappingStages(Stage, Stage),
    #[error("no baseline1 stage mark")]
    MissingBaselineI,
    #[error("event {0} lies outside the recording span")]
    EventOutOfRange(BehaviorEvent),
    #[error("stage {0} lies outside the recording span")]
    StageOutOfRange(StageMark),
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            IngestError::FileNotFound(path.to_path_buf())
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::FileNotFound(_) | IngestError::Io { .. })
    }

    /// Variant name, for reports that cite the violated check.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::FileNotFound(_) => "FileNotFound",
            IngestError::Io { .. } => "Io",
            IngestError::Csv(_) => "Csv",
            IngestError::Adapter(_) => "Adapter",
            IngestError::MissingChannel(_) => "MissingChannel",
            IngestError::MissingColumn(_) => "MissingColumn",
            IngestError::Parse { .. } => "Parse",
            IngestError::NonMonotoneTimestamps(_) => "NonMonotoneTimestamps",
            IngestError::EmptyRecording => "EmptyRecording",
            IngestError::UnknownBehavior(_) => "UnknownBehavior",
            IngestError::UnknownHand(_) => "UnknownHand",
            IngestError::NegativeDuration(_) => "NegativeDuration",
            IngestError::UnknownStage(_) => "UnknownStage",
            IngestError::EmptyStage(_) => "EmptyStage",
            IngestError::DuplicateStage(_) => "DuplicateStage",
            IngestError::OverlappingStages(..) => "OverlappingStages",
            IngestError::MissingBaselineI => "MissingBaselineI",
            IngestError::EventOutOfRange(_) => "EventOutOfRange",
            IngestError::StageOutOfRange(_) => "StageOutOfRange",
        }
    }
}

/// Sensor channels. Motion channels come first, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    AccX,
    AccY,
    AccZ,
    GyrX,
    GyrY,
    GyrZ,
    Hr,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::AccX,
        Channel::AccY,
        Channel::AccZ,
        Channel::GyrX,
        Channel::GyrY,
        Channel::GyrZ,
        Channel::Hr,
    ];
    pub const MOTION: [Channel; 6] = [
        Channel::AccX,
        Channel::AccY,
        Channel::AccZ,
        Channel::GyrX,
        Channel::GyrY,
        Channel::GyrZ,
    ];

    /// Column name in the canonical recording CSV.
    pub fn column(self) -> &'static str {
        match self {
            Channel::AccX => "accX",
            Channel::AccY => "accY",
            Channel::AccZ => "accZ",
            Channel::GyrX => "gyrX",
            Channel::GyrY => "gyrY",
            Channel::GyrZ => "gyrZ",
            Channel::Hr => "hr",
        }
    }

    /// Prefix used in feature names (`accXstd`, `HRmean`).
    pub fn feature_prefix(self) -> &'static str {
        match self {
            Channel::Hr => "HR",
            other => other.column(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

/// One synchronized sample. `hr` is `None` when the PPG reading dropped out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_ms: i64,
    pub motion: [f64; 6],
    pub hr: Option<f64>,
}

impl Sample {
    pub fn value(&self, channel: Channel) -> Option<f64> {
        match channel {
            Channel::Hr => self.hr,
            c => Some(self.motion[c.index()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    participant_id: String,
    samples: Vec<Sample>,
    nominal_rate_hz: f64,
}

impl Recording {
    /// Validates the sample sequence: non-empty, strictly increasing
    /// timestamps, finite motion values. Non-positive or non-finite heart
    /// rates are turned into missing readings.
    pub fn new(
        participant_id: impl Into<String>,
        mut samples: Vec<Sample>,
        nominal_rate_hz: f64,
    ) -> Result<Self, IngestError> {
        if samples.is_empty() {
            return Err(IngestError::EmptyRecording);
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t_ms <= w[0].t_ms {
                return Err(IngestError::NonMonotoneTimestamps(i + 1));
            }
        }
        for (i, s) in samples.iter_mut().enumerate() {
            if let Some(c) = s.motion.iter().position(|v| !v.is_finite()) {
                return Err(IngestError::Parse {
                    row: i + 1,
                    column: Channel::MOTION[c].column().to_string(),
                    value: s.motion[c].to_string(),
                });
            }
            s.hr = s.hr.filter(|v| v.is_finite() && *v > 0.0);
        }
        Ok(Recording {
            participant_id: participant_id.into(),
            samples,
            nominal_rate_hz,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn nominal_rate_hz(&self) -> f64 {
        self.nominal_rate_hz
    }

    /// Nominal spacing between samples, in ms.
    pub fn period_ms(&self) -> i64 {
        (1000.0 / self.nominal_rate_hz).round().max(1.0) as i64
    }

    pub fn start_ms(&self) -> i64 {
        self.samples[0].t_ms
    }

    /// Exclusive end of the covered span: the last sample owns one period.
    pub fn end_ms(&self) -> i64 {
        self.samples[self.samples.len() - 1].t_ms + self.period_ms()
    }

    pub fn duration_ms(&self) -> i64 {
        self.end_ms() - self.start_ms()
    }

    /// Samples with `start <= t < end`.
    pub fn slice(&self, start_ms: i64, end_ms: i64) -> &[Sample] {
        let lo = self.samples.partition_point(|s| s.t_ms < start_ms);
        let hi = self.samples.partition_point(|s| s.t_ms < end_ms);
        &self.samples[lo..hi.max(lo)]
    }

    pub(crate) fn with_samples(&self, samples: Vec<Sample>) -> Recording {
        Recording {
            participant_id: self.participant_id.clone(),
            samples,
            nominal_rate_hz: self.nominal_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "baseline1")]
    BaselineI,
    #[serde(rename = "task1_prep")]
    Task1Prep,
    #[serde(rename = "task1_present")]
    Task1Present,
    #[serde(rename = "baseline2")]
    BaselineII,
    #[serde(rename = "task2")]
    Task2,
    #[serde(rename = "baseline3")]
    BaselineIII,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::BaselineI,
        Stage::Task1Prep,
        Stage::Task1Present,
        Stage::BaselineII,
        Stage::Task2,
        Stage::BaselineIII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::BaselineI => "baseline1",
            Stage::Task1Prep => "task1_prep",
            Stage::Task1Present => "task1_present",
            Stage::BaselineII => "baseline2",
            Stage::Task2 => "task2",
            Stage::BaselineIII => "baseline3",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| IngestError::UnknownStage(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMark {
    pub stage: Stage,
    pub start_ms: i64,
    pub end_ms: i64,
}

impl StageMark {
    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }
}

impl fmt::Display for StageMark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}, {}) ms", self.stage, self.start_ms, self.end_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    SkinPicking,
    FaceTouching,
    Fidgeting,
    SkinBiting,
    HandScratching,
    NailBiting,
    LegScratching,
    HairPulling,
}

impl Behavior {
    pub const ALL: [Behavior; 8] = [
        Behavior::SkinPicking,
        Behavior::FaceTouching,
        Behavior::Fidgeting,
        Behavior::SkinBiting,
        Behavior::HandScratching,
        Behavior::NailBiting,
        Behavior::LegScratching,
        Behavior::HairPulling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Behavior::SkinPicking => "skin-picking",
            Behavior::FaceTouching => "face-touching",
            Behavior::Fidgeting => "fidgeting",
            Behavior::SkinBiting => "skin-biting",
            Behavior::HandScratching => "hand-scratching",
            Behavior::NailBiting => "nail-biting",
            Behavior::LegScratching => "leg-scratching",
            Behavior::HairPulling => "hair-pulling",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lowercase, trim, and fold `_` and spaces into `-`.
fn normalize_name(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == '_' || c.is_whitespace() { '-' } else { c })
        .collect()
}

impl FromStr for Behavior {
    type Err = IngestError;

    /// Case-insensitive; `Skin_Picking`, `skin picking` and `skin-picking`
    /// all resolve.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_name(s);
        Behavior::ALL
            .into_iter()
            .find(|b| b.name() == norm)
            .ok_or_else(|| IngestError::UnknownBehavior(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    #[serde(rename = "watch")]
    WatchHand,
    #[serde(rename = "other")]
    OtherHand,
    Both,
    Unknown,
}

impl Hand {
    pub fn name(self) -> &'static str {
        match self {
            Hand::WatchHand => "watch",
            Hand::OtherHand => "other",
            Hand::Both => "both",
            Hand::Unknown => "unknown",
        }
    }
}

impl FromStr for Hand {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_name(s).as_str() {
            "watch" | "watch-hand" => Ok(Hand::WatchHand),
            "other" | "other-hand" => Ok(Hand::OtherHand),
            "both" => Ok(Hand::Both),
            "" | "unknown" | "na" | "n/a" => Ok(Hand::Unknown),
            _ => Err(IngestError::UnknownHand(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BehaviorEvent {
    pub start_ms: i64,
    pub end_ms: i64,
    pub behavior: Behavior,
    pub hand: Hand,
}

impl BehaviorEvent {
    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }

    /// Whether the event touches the half-open span `[start, end)`. A
    /// zero-length event occupies the single instant at its start.
    pub fn overlaps(&self, start_ms: i64, end_ms: i64) -> bool {
        let ev_end = self.end_ms.max(self.start_ms + 1);
        self.start_ms < end_ms && ev_end > start_ms
    }
}

impl fmt::Display for BehaviorEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}, {}] ms ({} hand)",
            self.behavior,
            self.start_ms,
            self.end_ms,
            self.hand.name()
        )
    }
}

/// One participant's recording with its stage marks and labeled behaviors.
/// Immutable once assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionBundle {
    recording: Recording,
    stages: Vec<StageMark>,
    events: Vec<BehaviorEvent>,
}

impl SessionBundle {
    pub fn participant_id(&self) -> &str {
        self.recording.participant_id()
    }

    pub fn recording(&self) -> &Recording {
        &self.recording
    }

    pub fn stages(&self) -> &[StageMark] {
        &self.stages
    }

    pub fn events(&self) -> &[BehaviorEvent] {
        &self.events
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageMark> {
        self.stages.iter().find(|m| m.stage == stage)
    }

    pub(crate) fn with_recording(&self, recording: Recording) -> SessionBundle {
        SessionBundle {
            recording,
            stages: self.stages.clone(),
            events: self.events.clone(),
        }
    }
}

/// Cross-checks stages and events against the recording span.
pub fn assemble_session(
    recording: Recording,
    mut stages: Vec<StageMark>,
    mut events: Vec<BehaviorEvent>,
) -> Result<SessionBundle, IngestError> {
    let (lo, hi) = (recording.start_ms(), recording.end_ms());
    stages.sort_by_key(|m| (m.start_ms, m.stage));
    validate_stages(&stages)?;
    if let Some(m) = stages.iter().find(|m| m.start_ms < lo || m.end_ms > hi) {
        return Err(IngestError::StageOutOfRange(*m));
    }
    events.sort();
    if let Some(e) = events.iter().find(|e| e.start_ms < lo || e.end_ms > hi) {
        return Err(IngestError::EventOutOfRange(*e));
    }
    Ok(SessionBundle {
        recording,
        stages,
        events,
    })
}

fn validate_stages(sorted: &[StageMark]) -> Result<(), IngestError> {
    for (i, m) in sorted.iter().enumerate() {
        if m.start_ms >= m.end_ms {
            return Err(IngestError::EmptyStage(i + 1));
        }
        if sorted[..i].iter().any(|p| p.stage == m.stage) {
            return Err(IngestError::DuplicateStage(m.stage));
        }
    }
    for w in sorted.windows(2) {
        if w[0].end_ms > w[1].start_ms {
            return Err(IngestError::OverlappingStages(w[0].stage, w[1].stage));
        }
    }
    if !sorted.iter().any(|m| m.stage == Stage::BaselineI) {
        return Err(IngestError::MissingBaselineI);
    }
    Ok(())
}

/// Maps a non-canonical file layout onto the canonical schemas.
///
/// * `columns`: canonical column name -> column name in the source file
/// * `behavior_aliases` / `stage_aliases`: source name -> canonical name
/// * `unit_scale`: canonical column -> multiplier applied after parsing
///   (e.g. `{"timestamp_ms": 1000}` for timestamps stored in seconds)
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Adapter {
    pub columns: BTreeMap<String, String>,
    pub behavior_aliases: BTreeMap<String, String>,
    pub unit_scale: BTreeMap<String, f64>,
    pub stage_aliases: BTreeMap<String, String>,
    pub sample_rate_hz: Option<f64>,
}

impl Adapter {
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let adapter: Adapter =
            serde_json::from_str(text).map_err(|e| IngestError::Adapter(e.to_string()))?;
        if let Some((k, v)) = adapter.unit_scale.iter().find(|(_, v)| !v.is_finite() || **v == 0.0)
        {
            return Err(IngestError::Adapter(format!("unit_scale[{k}] = {v} is not usable")));
        }
        if let Some(rate) = adapter.sample_rate_hz {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(IngestError::Adapter(format!("sample_rate_hz = {rate}")));
            }
        }
        Ok(adapter)
    }

    fn source_column<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.columns.get(canonical).map(String::as_str).unwrap_or(canonical)
    }

    fn scale(&self, canonical: &str) -> f64 {
        self.unit_scale.get(canonical).copied().unwrap_or(1.0)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate_hz.unwrap_or(DEFAULT_SAMPLE_RATE_HZ)
    }

    pub fn resolve_behavior(&self, raw: &str) -> Result<Behavior, IngestError> {
        let norm = normalize_name(raw);
        let target = self
            .behavior_aliases
            .iter()
            .find(|(alias, _)| normalize_name(alias) == norm)
            .map(|(_, canonical)| canonical.as_str())
            .unwrap_or(raw);
        target
            .parse()
            .map_err(|_| IngestError::UnknownBehavior(raw.to_string()))
    }

    pub fn resolve_stage(&self, raw: &str) -> Result<Stage, IngestError> {
        let raw = raw.trim();
        let target = self.stage_aliases.get(raw).map(String::as_str).unwrap_or(raw);
        target
            .parse()
            .map_err(|_| IngestError::UnknownStage(raw.to_string()))
    }
}

struct Table<R: Read> {
    reader: csv::Reader<R>,
    headers: csv::StringRecord,
}

impl<R: Read> Table<R> {
    fn new(reader: R) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let headers = reader.headers()?.clone();
        Ok(Table { reader, headers })
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

fn open(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::open(path).map_err(|e| IngestError::io(path, e))
}

fn parse_f64(row: usize, column: &str, cell: &str) -> Result<f64, IngestError> {
    cell.parse::<f64>().map_err(|_| IngestError::Parse {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })
}

fn parse_ms(row: usize, column: &str, cell: &str, scale: f64) -> Result<i64, IngestError> {
    let v = parse_f64(row, column, cell)? * scale;
    if !v.is_finite() {
        return Err(IngestError::Parse {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        });
    }
    Ok(v.round() as i64)
}

pub fn load_recording(
    path: &Path,
    participant_id: &str,
    adapter: &Adapter,
) -> Result<Recording, IngestError> {
    read_recording(open(path)?, participant_id, adapter)
}

pub fn read_recording<R: Read>(
    reader: R,
    participant_id: &str,
    adapter: &Adapter,
) -> Result<Recording, IngestError> {
    let mut table = Table::new(reader)?;
    let ts_col = table
        .find(adapter.source_column("timestamp_ms"))
        .ok_or_else(|| IngestError::MissingChannel("timestamp_ms".into()))?;
    let mut cols = [0usize; 7];
    for ch in Channel::ALL {
        cols[ch.index()] = table
            .find(adapter.source_column(ch.column()))
            .ok_or_else(|| IngestError::MissingChannel(ch.column().into()))?;
    }
    let ts_scale = adapter.scale("timestamp_ms");
    let scales: Vec<f64> = Channel::ALL.iter().map(|c| adapter.scale(c.column())).collect();

    let mut samples = Vec::new();
    for (i, rec) in table.reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let t_ms = parse_ms(row, "timestamp_ms", cell(ts_col), ts_scale)?;
        let mut motion = [0.0; 6];
        for ch in Channel::MOTION {
            let v = parse_f64(row, ch.column(), cell(cols[ch.index()]))?;
            motion[ch.index()] = v * scales[ch.index()];
        }
        let hr_cell = cell(cols[Channel::Hr.index()]);
        let hr = if hr_cell.is_empty() {
            None
        } else {
            Some(parse_f64(row, "hr", hr_cell)? * scales[Channel::Hr.index()])
        };
        samples.push(Sample { t_ms, motion, hr });
    }
    Recording::new(participant_id, samples, adapter.sample_rate())
}

pub fn load_labels(path: &Path, adapter: &Adapter) -> Result<Vec<BehaviorEvent>, IngestError> {
    read_labels(open(path)?, adapter)
}

/// Events come back sorted regardless of row order. A missing `hand` column
/// marks every event as [`Hand::Unknown`].
pub fn read_labels<R: Read>(reader: R, adapter: &Adapter) -> Result<Vec<BehaviorEvent>, IngestError> {
    let mut table = Table::new(reader)?;
    let col = |t: &Table<R>, name: &str| {
        t.find(adapter.source_column(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let start_col = col(&table, "start_ms")?;
    let end_col = col(&table, "end_ms")?;
    let beh_col = col(&table, "behavior")?;
    let hand_col = table.find(adapter.source_column("hand"));
    let (s_scale, e_scale) = (adapter.scale("start_ms"), adapter.scale("end_ms"));

    let mut events = Vec::new();
    for (i, rec) in table.reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let start_ms = parse_ms(row, "start_ms", cell(start_col), s_scale)?;
        let end_ms = parse_ms(row, "end_ms", cell(end_col), e_scale)?;
        if end_ms < start_ms {
            return Err(IngestError::NegativeDuration(row));
        }
        let behavior = adapter.resolve_behavior(cell(beh_col))?;
        let hand = match hand_col {
            Some(c) => cell(c).parse()?,
            None => Hand::Unknown,
        };
        events.push(BehaviorEvent {
            start_ms,
            end_ms,
            behavior,
            hand,
        });
    }
    events.sort();
    Ok(events)
}

pub fn load_stages(path: &Path, adapter: &Adapter) -> Result<Vec<StageMark>, IngestError> {
    read_stages(open(path)?, adapter)
}

pub fn read_stages<R: Read>(reader: R, adapter: &Adapter) -> Result<Vec<StageMark>, IngestError> {
    let mut table = Table::new(reader)?;
    let col = |t: &Table<R>, name: &str| {
        t.find(adapter.source_column(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let stage_col = col(&table, "stage")?;
    let start_col = col(&table, "start_ms")?;
    let end_col = col(&table, "end_ms")?;
    let (s_scale, e_scale) = (adapter.scale("start_ms"), adapter.scale("end_ms"));

    let mut marks = Vec::new();
    for (i, rec) in table.reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let stage = adapter.resolve_stage(cell(stage_col))?;
        let start_ms = parse_ms(row, "start_ms", cell(start_col), s_scale)?;
        let end_ms = parse_ms(row, "end_ms", cell(end_col), e_scale)?;
        if start_ms >= end_ms {
            return Err(IngestError::EmptyStage(row));
        }
        marks.push(StageMark {
            stage,
            start_ms,
            end_ms,
        });
    }
    marks.sort_by_key(|m| (m.start_ms, m.stage));
    validate_stages(&marks)?;
    Ok(marks)
}

/// Writes the canonical recording CSV. Floats use six decimals; missing heart
/// rate is an empty cell.
pub fn write_recording<W: Write>(rec: &Recording, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_ms", "accX", "accY", "accZ", "gyrX", "gyrY", "gyrZ", "hr"])?;
    for s in rec.samples() {
        let mut row = Vec::with_capacity(8);
        row.push(s.t_ms.to_string());
        row.extend(s.motion.iter().map(|v| format!("{v:.6}")));
        row.push(s.hr.map(|v| format!("{v:.6}")).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

pub fn write_labels<W: Write>(events: &[BehaviorEvent], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_ms", "end_ms", "behavior", "hand"])?;
    for e in events {
        w.write_record([
            e.start_ms.to_string(),
            e.end_ms.to_string(),
            e.behavior.name().to_string(),
            e.hand.name().to_string(),
        ])?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

pub fn write_stages<W: Write>(stages: &[StageMark], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "start_ms", "end_ms"])?;
    for m in stages {
        w.write_record([
            m.stage.name().to_string(),
            m.start_ms.to_string(),
            m.end_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

/// Writes a bundle as a participant directory in canonical form.
pub fn write_session(bundle: &SessionBundle, dir: &Path) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| IngestError::io(&p, e))
    };
    write_recording(bundle.recording(), create(RECORDING_FILE)?)?;
    write_labels(bundle.events(), create(LABELS_FILE)?)?;
    write_stages(bundle.stages(), create(STAGES_FILE)?)?;
    Ok(())
}

/// A participant directory under a dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionDir {
    pub participant_id: String,
    pub path: PathBuf,
}

/// Lists participant directories under `root`, sorted by name.
pub fn discover_sessions(root: &Path) -> Result<Vec<SessionDir>, IngestError> {
    let entries = std::fs::read_dir(root).map_err(|e| IngestError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| IngestError::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            dirs.push(SessionDir {
                participant_id: entry.file_name().to_string_lossy().into_owned(),
                path,
            });
        }
    }
    dirs.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    Ok(dirs)
}

pub fn load_session(dir: &SessionDir, adapter: &Adapter) -> Result<SessionBundle, IngestError> {
    let recording = load_recording(&dir.path.join(RECORDING_FILE), &dir.participant_id, adapter)?;
    let stages = load_stages(&dir.path.join(STAGES_FILE), adapter)?;
    let events = load_labels(&dir.path.join(LABELS_FILE), adapter)?;
    assemble_session(recording, stages, events)
}

/// Loads every session under `root`, failing on the first invalid one.
pub fn load_dataset(root: &Path, adapter: &Adapter) -> Result<Vec<SessionBundle>, IngestError> {
    discover_sessions(root)?
        .iter()
        .map(|d| load_session(d, adapter))
        .collect()
}
