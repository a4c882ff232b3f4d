//! Anticipatory `Ax/By` windows.
//!
//! A window anchored at `t` has an x-span `[t - A s, t)` used for features and
//! a y-span `[t, t + B s)` used only for labeling. Positives are anchored at
//! behavior onsets; negatives are anchored on a 1 s grid wherever the y-span
//! is free of any labeled behavior.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Behavior, BehaviorEvent, SessionBundle};
use crate::preprocess::hr_validity_score;
use crate::util::{fnv1a64, mix_seed};

pub const SUPPORTED_X_SECONDS: [u32; 5] = [60, 120, 180, 240, 300];

/// Spacing of candidate negative anchors.
pub const NEGATIVE_GRID_MS: i64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("unsupported window {0}: x must be one of 60, 120, 180, 240, 300 and y >= 1")]
    UnsupportedWindow(String),
    #[error("only {available} negative anchors available, {requested} requested")]
    InsufficientNegativeSpace { available: usize, requested: usize },
    #[error("invalid label set `{0}`")]
    InvalidLabelSet(String),
    #[error("no sessions given")]
    NoSessions,
}

/// `Ax/By` in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WindowSpec {
    x_seconds: u32,
    y_seconds: u32,
}

impl WindowSpec {
    pub const SHORT: WindowSpec = WindowSpec { x_seconds: 60, y_seconds: 1 };
    pub const LONG: WindowSpec = WindowSpec { x_seconds: 300, y_seconds: 1 };

    pub fn new(x_seconds: u32, y_seconds: u32) -> Result<Self, WindowError> {
        if !SUPPORTED_X_SECONDS.contains(&x_seconds) || y_seconds < 1 {
            return Err(WindowError::UnsupportedWindow(format!("{x_seconds}x/{y_seconds}y")));
        }
        Ok(WindowSpec { x_seconds, y_seconds })
    }

    pub fn x_seconds(&self) -> u32 {
        self.x_seconds
    }

    pub fn y_seconds(&self) -> u32 {
        self.y_seconds
    }

    pub fn x_ms(&self) -> i64 {
        i64::from(self.x_seconds) * 1000
    }

    pub fn y_ms(&self) -> i64 {
        i64::from(self.y_seconds) * 1000
    }

    /// 5-minute windows carry heart-rate variability features.
    pub fn has_hrv(&self) -> bool {
        self.x_seconds >= 300
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x/{}y", self.x_seconds, self.y_seconds)
    }
}

impl FromStr for WindowSpec {
    type Err = WindowError;

    /// Parses `60x/1y`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WindowError::UnsupportedWindow(s.to_string());
        let (x, y) = s.trim().split_once('/').ok_or_else(bad)?;
        let x = x.strip_suffix('x').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y = y.strip_suffix('y').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        WindowSpec::new(x, y)
    }
}

impl TryFrom<String> for WindowSpec {
    type Error = WindowError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<WindowSpec> for String {
    fn from(w: WindowSpec) -> String {
        w.to_string()
    }
}

/// Which behaviors count as positives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LabelSet {
    AllCompulsive,
    FaceTouching,
    SkinPicking,
    Custom(Vec<Behavior>),
}

impl LabelSet {
    pub const STANDARD_SETS: [LabelSet; 3] =
        [LabelSet::AllCompulsive, LabelSet::FaceTouching, LabelSet::SkinPicking];

    pub fn custom(behaviors: impl IntoIterator<Item = Behavior>) -> Result<Self, WindowError> {
        let mut v: Vec<Behavior> = behaviors.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(WindowError::InvalidLabelSet("custom:".into()));
        }
        Ok(LabelSet::Custom(v))
    }

    pub fn includes(&self, b: Behavior) -> bool {
        match self {
            LabelSet::AllCompulsive => true,
            LabelSet::FaceTouching => b == Behavior::FaceTouching,
            LabelSet::SkinPicking => b == Behavior::SkinPicking,
            LabelSet::Custom(set) => set.contains(&b),
        }
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSet::AllCompulsive => f.write_str("all-compulsive"),
            LabelSet::FaceTouching => f.write_str("face-touching"),
            LabelSet::SkinPicking => f.write_str("skin-picking"),
            LabelSet::Custom(set) => {
                let names: Vec<_> = set.iter().map(|b| b.name()).collect();
                write!(f, "custom:{}", names.join(","))
            }
        }
    }
}

impl FromStr for LabelSet {
    type Err = WindowError;

    /// `all-compulsive`, `face-touching`, `skin-picking`, or
    /// `custom:<behavior>,<behavior>,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_lowercase().replace('_', "-");
        match t.as_str() {
            "all-compulsive" | "all" => Ok(LabelSet::AllCompulsive),
            "face-touching" => Ok(LabelSet::FaceTouching),
            "skin-picking" => Ok(LabelSet::SkinPicking),
            _ => {
                let list = t
                    .strip_prefix("custom:")
                    .ok_or_else(|| WindowError::InvalidLabelSet(s.to_string()))?;
                let behaviors = list
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.parse::<Behavior>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| WindowError::InvalidLabelSet(s.to_string()))?;
                LabelSet::custom(behaviors)
            }
        }
    }
}

impl TryFrom<String> for LabelSet {
    type Error = WindowError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LabelSet> for String {
    fn from(l: LabelSet) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowLabel {
    Positive(Behavior),
    Negative,
}

impl WindowLabel {
    pub fn is_positive(&self) -> bool {
        matches!(self, WindowLabel::Positive(_))
    }

    pub fn behavior(&self) -> Option<Behavior> {
        match self {
            WindowLabel::Positive(b) => Some(*b),
            WindowLabel::Negative => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowInstance {
    pub participant_id: String,
    pub anchor_ms: i64,
    /// `[anchor - A, anchor)`
    pub x_span: (i64, i64),
    /// `[anchor, anchor + B)`
    pub y_span: (i64, i64),
    pub label: WindowLabel,
    /// No labeled behavior of any type touches the x-span.
    pub clean: bool,
    /// Heart-rate validity over the x-span.
    pub hr_validity: f64,
}

fn x_span_clean(events: &[BehaviorEvent], span: (i64, i64)) -> bool {
    !events.iter().any(|e| e.overlaps(span.0, span.1))
}

fn make_window(bundle: &SessionBundle, spec: WindowSpec, anchor: i64, label: WindowLabel) -> WindowInstance {
    let rec = bundle.recording();
    let x_span = (anchor - spec.x_ms(), anchor);
    let hr_validity = hr_validity_score(
        rec.slice(x_span.0, x_span.1),
        x_span.0,
        x_span.1,
        rec.nominal_rate_hz(),
    )
    .unwrap_or(0.0);
    WindowInstance {
        participant_id: bundle.participant_id().to_string(),
        anchor_ms: anchor,
        x_span,
        y_span: (anchor, anchor + spec.y_ms()),
        label,
        clean: x_span_clean(bundle.events(), x_span),
        hr_validity,
    }
}

/// Events of the label set that could not be windowed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    /// Onset closer than A seconds to the recording start.
    pub insufficient_history: usize,
    /// Onset plus B seconds runs past the recording end.
    pub insufficient_future: usize,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.insufficient_history + self.insufficient_future
    }

    fn add(&mut self, other: SkipReport) {
        self.insufficient_history += other.insufficient_history;
        self.insufficient_future += other.insufficient_future;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositiveWindows {
    pub windows: Vec<WindowInstance>,
    pub skipped: SkipReport,
}

/// One window per included event whose onset leaves A seconds of history and
/// B seconds of future inside the recording. Cleanliness is judged against
/// every labeled event, whatever its type.
pub fn positive_windows(bundle: &SessionBundle, spec: WindowSpec, labels: &LabelSet) -> PositiveWindows {
    let rec = bundle.recording();
    let mut skipped = SkipReport::default();
    let mut windows = Vec::new();
    for e in bundle.events().iter().filter(|e| labels.includes(e.behavior)) {
        let t = e.start_ms;
        if t - spec.x_ms() < rec.start_ms() {
            skipped.insufficient_history += 1;
        } else if t + spec.y_ms() > rec.end_ms() {
            skipped.insufficient_future += 1;
        } else {
            windows.push(make_window(bundle, spec, t, WindowLabel::Positive(e.behavior)));
        }
    }
    windows.sort_by(|a, b| {
        a.anchor_ms
            .cmp(&b.anchor_ms)
            .then_with(|| a.label.behavior().cmp(&b.label.behavior()))
    });
    PositiveWindows { windows, skipped }
}

/// Anchors on the 1 s grid whose x-span fits the recording and whose y-span
/// meets no labeled behavior of any type.
pub fn negative_anchors(bundle: &SessionBundle, spec: WindowSpec) -> Vec<i64> {
    let rec = bundle.recording();
    let events = bundle.events();
    let mut anchors = Vec::new();
    let mut t = rec.start_ms() + spec.x_ms();
    while t + spec.y_ms() <= rec.end_ms() {
        if !events.iter().any(|e| e.overlaps(t, t + spec.y_ms())) {
            anchors.push(t);
        }
        t += NEGATIVE_GRID_MS;
    }
    anchors
}

/// Exactly `count` negatives drawn uniformly without replacement from
/// [`negative_anchors`], returned in anchor order.
pub fn negative_windows(
    bundle: &SessionBundle,
    spec: WindowSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<WindowInstance>, WindowError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let anchors = negative_anchors(bundle, spec);
    if anchors.len() < count {
        return Err(WindowError::InsufficientNegativeSpace {
            available: anchors.len(),
            requested: count,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<i64> = index::sample(&mut rng, anchors.len(), count)
        .into_iter()
        .map(|i| anchors[i])
        .collect();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|t| make_window(bundle, spec, t, WindowLabel::Negative))
        .collect())
}

/// How negatives are matched to positives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    /// Each session contributes as many negatives as positives.
    #[default]
    PerSession,
    /// Total negatives equal total positives, sampled from the pooled anchors
    /// of all sessions.
    Aggregate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub clean_only: bool,
    pub balance: Balance,
}

/// Seed for one session: the run seed offset by a stable hash of the
/// participant id.
pub fn session_seed(seed: u64, participant_id: &str) -> u64 {
    seed.wrapping_add(fnv1a64(participant_id.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    pub spec: WindowSpec,
    pub labels: LabelSet,
    pub windows: Vec<WindowInstance>,
    pub skipped: SkipReport,
}

impl WindowDataset {
    pub fn n_positive(&self) -> usize {
        self.windows.iter().filter(|w| w.label.is_positive()).count()
    }

    pub fn n_negative(&self) -> usize {
        self.windows.len() - self.n_positive()
    }

    /// CSV: `participant,anchor_ms,label,behavior,clean,hr_validity`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["participant", "anchor_ms", "label", "behavior", "clean", "hr_validity"])?;
        for win in &self.windows {
            w.write_record([
                win.participant_id.clone(),
                win.anchor_ms.to_string(),
                u8::from(win.label.is_positive()).to_string(),
                win.label.behavior().map(|b| b.name()).unwrap_or("").to_string(),
                win.clean.to_string(),
                format!("{:.6}", win.hr_validity),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Positives of every session followed by matching negatives, grouped by
/// session in input order. Deterministic given `seed`.
pub fn build_dataset(
    bundles: &[SessionBundle],
    spec: WindowSpec,
    labels: &LabelSet,
    seed: u64,
    options: DatasetOptions,
) -> Result<WindowDataset, WindowError> {
    if bundles.is_empty() {
        return Err(WindowError::NoSessions);
    }
    let mut skipped = SkipReport::default();
    let mut per_session = Vec::with_capacity(bundles.len());
    for b in bundles {
        let pos = positive_windows(b, spec, labels);
        skipped.add(pos.skipped);
        let windows: Vec<_> = pos
            .windows
            .into_iter()
            .filter(|w| w.clean || !options.clean_only)
            .collect();
        per_session.push(windows);
    }

    let mut windows = Vec::new();
    match options.balance {
        Balance::PerSession => {
            for (b, pos) in bundles.iter().zip(per_session) {
                let neg = negative_windows(b, spec, pos.len(), session_seed(seed, b.participant_id()))?;
                windows.extend(pos);
                windows.extend(neg);
            }
        }
        Balance::Aggregate => {
            let total: usize = per_session.iter().map(Vec::len).sum();
            let pool: Vec<(usize, i64)> = bundles
                .iter()
                .enumerate()
                .flat_map(|(i, b)| negative_anchors(b, spec).into_iter().map(move |t| (i, t)))
                .collect();
            if pool.len() < total {
                return Err(WindowError::InsufficientNegativeSpace {
                    available: pool.len(),
                    requested: total,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xa66));
            let mut picked: Vec<(usize, i64)> = index::sample(&mut rng, pool.len(), total)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            picked.sort_unstable();
            for (i, pos) in per_session.into_iter().enumerate() {
                windows.extend(pos);
                windows.extend(
                    picked
                        .iter()
                        .filter(|(s, _)| *s == i)
                        .map(|(_, t)| make_window(&bundles[i], spec, *t, WindowLabel::Negative)),
                );
            }
        }
    }
    Ok(WindowDataset {
        spec,
        labels: labels.clone(),
        windows,
        skipped,
    })
}
