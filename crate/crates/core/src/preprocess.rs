//! Baseline-relative normalization and heart-rate derived series.
//!
//! Every channel is z-scored against the first resting baseline of its own
//! session: `(x - mean_b1) / max(std_b1, EPSILON)`. Heart rate is also turned
//! into pseudo RR intervals (`60000 / BPM`) for RMSSD computation, since the
//! recordings carry instantaneous BPM and not raw beat times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::rmssd;
use crate::ingest::{Channel, Sample, SessionBundle, Stage};
use crate::util::mean_std;

/// Floor applied to a zero baseline standard deviation.
pub const EPSILON: f64 = 1e-8;

/// Length of the sub-segments RMSSD is computed over.
pub const RMSSD_SEGMENT_MS: i64 = 60_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("session has no baseline1 stage")]
    MissingBaselineI,
    #[error("baseline1 holds {0} samples, need at least 2")]
    InsufficientBaseline(usize),
    #[error("baseline1 has no valid heart-rate samples")]
    NoBaselineHeartRate,
    #[error("stats belong to participant `{stats}`, session is `{session}`")]
    SessionMismatch { stats: String, session: String },
    #[error("span holds {0} valid heart-rate samples, need at least 2")]
    InsufficientHrData(usize),
    #[error("empty time span")]
    EmptySpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.std.max(EPSILON)
    }

    pub fn is_degenerate(&self) -> bool {
        self.std < EPSILON
    }
}

/// Per-channel reference statistics from Baseline I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStats {
    pub participant_id: String,
    /// Indexed by [`Channel::index`].
    pub channels: [ChannelStats; 7],
    /// RMSSD over the 60 s sub-segments of Baseline I; `None` when no
    /// sub-segment has enough heart-rate data.
    pub rmssd: Option<ChannelStats>,
}

impl BaselineStats {
    pub fn channel(&self, c: Channel) -> ChannelStats {
        self.channels[c.index()]
    }
}

/// Mean and population std of each channel over the Baseline I samples.
/// Heart-rate statistics use non-missing samples only.
pub fn compute_baseline_stats(bundle: &SessionBundle) -> Result<BaselineStats, PreprocessError> {
    let mark = bundle
        .stage(Stage::BaselineI)
        .ok_or(PreprocessError::MissingBaselineI)?;
    let rec = bundle.recording();
    let samples = rec.slice(mark.start_ms, mark.end_ms);
    if samples.len() < 2 {
        return Err(PreprocessError::InsufficientBaseline(samples.len()));
    }

    let mut channels = [ChannelStats { mean: 0.0, std: 0.0 }; 7];
    for ch in Channel::MOTION {
        let values: Vec<f64> = samples.iter().map(|s| s.motion[ch.index()]).collect();
        let (mean, std) = mean_std(&values).expect("non-empty");
        channels[ch.index()] = ChannelStats { mean, std };
    }
    let hr: Vec<f64> = samples.iter().filter_map(|s| s.hr).collect();
    let (mean, std) = mean_std(&hr).ok_or(PreprocessError::NoBaselineHeartRate)?;
    channels[Channel::Hr.index()] = ChannelStats { mean, std };

    let mut segment_rmssd = Vec::new();
    let mut start = mark.start_ms;
    while start + RMSSD_SEGMENT_MS <= mark.end_ms {
        let seg = rec.slice(start, start + RMSSD_SEGMENT_MS);
        if let Ok(rr) = derive_rr_intervals(seg, start, start + RMSSD_SEGMENT_MS) {
            if let Ok(v) = rmssd(&rr) {
                segment_rmssd.push(v);
            }
        }
        start += RMSSD_SEGMENT_MS;
    }
    let rmssd = mean_std(&segment_rmssd).map(|(mean, std)| ChannelStats { mean, std });

    Ok(BaselineStats {
        participant_id: bundle.participant_id().to_string(),
        channels,
        rmssd,
    })
}

/// A normalized copy of a session plus the channels whose baseline std hit
/// the epsilon floor.
#[derive(Debug, Clone)]
pub struct NormalizedSession {
    pub bundle: SessionBundle,
    pub degenerate: Vec<Channel>,
}

pub fn normalize_session(
    bundle: &SessionBundle,
    stats: &BaselineStats,
) -> Result<NormalizedSession, PreprocessError> {
    if stats.participant_id != bundle.participant_id() {
        return Err(PreprocessError::SessionMismatch {
            stats: stats.participant_id.clone(),
            session: bundle.participant_id().to_string(),
        });
    }
    let samples = bundle
        .recording()
        .samples()
        .iter()
        .map(|s| {
            let mut out = *s;
            for ch in Channel::MOTION {
                out.motion[ch.index()] = stats.channel(ch).z(s.motion[ch.index()]);
            }
            out.hr = s.hr.map(|v| stats.channel(Channel::Hr).z(v));
            out
        })
        .collect();
    let degenerate = Channel::ALL
        .into_iter()
        .filter(|c| stats.channel(*c).is_degenerate())
        .collect();
    Ok(NormalizedSession {
        bundle: bundle.with_recording(bundle.recording().with_samples(samples)),
        degenerate,
    })
}

/// Pseudo interbeat intervals over a span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    pub intervals_ms: Vec<f64>,
    pub span_ms: (i64, i64),
}

/// One interval of `60000 / BPM` per non-missing sample in `samples`, which
/// must carry raw (not normalized) heart rate.
pub fn derive_rr_intervals(
    samples: &[Sample],
    start_ms: i64,
    end_ms: i64,
) -> Result<RrSeries, PreprocessError> {
    let intervals_ms: Vec<f64> = samples
        .iter()
        .filter_map(|s| s.hr)
        .filter(|bpm| *bpm > 0.0)
        .map(|bpm| 60_000.0 / bpm)
        .collect();
    if intervals_ms.len() < 2 {
        return Err(PreprocessError::InsufficientHrData(intervals_ms.len()));
    }
    Ok(RrSeries {
        intervals_ms,
        span_ms: (start_ms, end_ms),
    })
}

/// Fraction of the expected heart-rate samples (span length times the
/// nominal rate) that are present, capped at 1.
pub fn hr_validity_score(
    samples: &[Sample],
    start_ms: i64,
    end_ms: i64,
    nominal_rate_hz: f64,
) -> Result<f64, PreprocessError> {
    if end_ms <= start_ms {
        return Err(PreprocessError::EmptySpan);
    }
    let expected = (end_ms - start_ms) as f64 / 1000.0 * nominal_rate_hz;
    let present = samples.iter().filter(|s| s.hr.is_some()).count() as f64;
    Ok((present / expected).clamp(0.0, 1.0))
}

/// A session ready for featurization: raw data (for RR intervals), its
/// normalized copy (for descriptive statistics) and the reference stats.
#[derive(Debug, Clone)]
pub struct PreparedSession {
    pub raw: SessionBundle,
    pub normalized: SessionBundle,
    pub stats: BaselineStats,
    pub degenerate: Vec<Channel>,
}

impl PreparedSession {
    pub fn participant_id(&self) -> &str {
        self.raw.participant_id()
    }
}

pub fn prepare_session(bundle: &SessionBundle) -> Result<PreparedSession, PreprocessError> {
    let stats = compute_baseline_stats(bundle)?;
    let NormalizedSession {
        bundle: normalized,
        degenerate,
    } = normalize_session(bundle, &stats)?;
    Ok(PreparedSession {
        raw: bundle.clone(),
        normalized,
        stats,
        degenerate,
    })
}
