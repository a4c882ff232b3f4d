//! Synthetic sessions that follow the recording protocol.
//!
//! Each participant gets the six protocol stages back to back, behaviors
//! drawn by prevalence with higher density during the task stages, motion
//! and heart rate with per-participant offsets, and heart-rate dropouts.
//! Motion intensity and heart rate ramp up over the half minute (motion) and
//! minute (heart rate) before each onset, scaled by `signal`, so the
//! anticipatory task is learnable but not trivial.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::ingest::{
    assemble_session, write_session, Behavior, BehaviorEvent, Hand, IngestError, Recording, Sample, SessionBundle,
    Stage, StageMark,
};
use crate::util::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub participants: usize,
    pub sample_rate_hz: f64,
    /// Stage lengths in protocol order.
    pub stage_seconds: [u32; 6],
    /// Behaviors per session (fewer when the session is too crowded).
    pub events_per_session: usize,
    /// Relative frequency of each behavior, in [`Behavior::ALL`] order.
    pub prevalence: [f64; 8],
    /// Strength of the pre-onset signature; 0 makes onsets unpredictable.
    pub signal: f64,
    /// Probability that a single heart-rate second is missing.
    pub hr_missing_rate: f64,
    /// Contiguous heart-rate gaps of 60 to 180 s after Baseline I.
    pub hr_gaps: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            participants: 10,
            sample_rate_hz: 10.0,
            stage_seconds: [300, 120, 300, 300, 600, 300],
            events_per_session: 24,
            prevalence: [41.2, 34.3, 8.8, 5.0, 4.0, 3.0, 2.0, 1.7],
            signal: 1.0,
            hr_missing_rate: 0.03,
            hr_gaps: 1,
            seed: 0,
        }
    }
}

/// Minimum spacing between consecutive onsets.
const MIN_GAP_MS: i64 = 25_000;
const MOTION_LEAD_MS: f64 = 30_000.0;
const HR_LEAD_MS: f64 = 60_000.0;

fn stage_density(stage: Stage) -> f64 {
    match stage {
        Stage::Task1Present => 1.0,
        Stage::Task2 => 0.8,
        Stage::Task1Prep => 0.5,
        _ => 0.35,
    }
}

fn stage_hr_offset(stage: Stage) -> f64 {
    match stage {
        Stage::Task1Present => 6.0,
        Stage::Task2 => 4.0,
        Stage::Task1Prep => 3.0,
        _ => 0.0,
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn participant_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

fn stage_marks(config: &SynthConfig) -> Vec<StageMark> {
    let mut t = 0i64;
    Stage::ALL
        .iter()
        .zip(config.stage_seconds)
        .map(|(&stage, secs)| {
            let start = t;
            t += i64::from(secs) * 1000;
            StageMark {
                stage,
                start_ms: start,
                end_ms: t,
            }
        })
        .collect()
}

fn stage_at(stages: &[StageMark], t: i64) -> Stage {
    stages
        .iter()
        .find(|m| t >= m.start_ms && t < m.end_ms)
        .map_or(Stage::BaselineIII, |m| m.stage)
}

fn place_events(config: &SynthConfig, stages: &[StageMark], end_ms: i64, rng: &mut ChaCha8Rng) -> Vec<BehaviorEvent> {
    let weights = WeightedIndex::new(config.prevalence).expect("prevalence weights are positive");
    let hands = [Hand::WatchHand, Hand::OtherHand, Hand::Both];
    let (lo, hi) = (60_000, end_ms - 15_000);
    let mut events: Vec<BehaviorEvent> = Vec::new();
    let mut attempts = 0;
    while events.len() < config.events_per_session && attempts < 10_000 && hi > lo {
        attempts += 1;
        let onset = rng.gen_range(lo..hi) / 100 * 100;
        if rng.gen::<f64>() > stage_density(stage_at(stages, onset)) {
            continue;
        }
        if events.iter().any(|e| (e.start_ms - onset).abs() < MIN_GAP_MS) {
            continue;
        }
        let duration = rng.gen_range(3..=12) * 1000;
        events.push(BehaviorEvent {
            start_ms: onset,
            end_ms: onset + duration,
            behavior: Behavior::ALL[weights.sample(rng)],
            hand: hands[rng.gen_range(0..hands.len())],
        });
    }
    events.sort();
    events
}

/// Pre-onset ramp in [0, 1] and whether `t` lies inside an event.
fn event_influence(events: &[BehaviorEvent], t: i64, lead_ms: f64) -> (f64, bool) {
    let mut ramp: f64 = 0.0;
    let mut inside = false;
    for e in events {
        if t >= e.start_ms && t < e.end_ms {
            inside = true;
        }
        let dt = (e.start_ms - t) as f64;
        if dt > 0.0 && dt <= lead_ms {
            ramp = ramp.max(1.0 - dt / lead_ms);
        }
    }
    (ramp, inside)
}

/// Session `index` of the synthetic dataset. Depends only on
/// `(config, index)`.
pub fn generate_session(config: &SynthConfig, index: usize) -> Result<SessionBundle, IngestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, index as u64));
    let stages = stage_marks(config);
    let end_ms = stages.last().map_or(0, |m| m.end_ms);
    let events = place_events(config, &stages, end_ms, &mut rng);

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut acc_bias = [0.0; 3];
    for b in &mut acc_bias {
        *b = 0.3 * unit.sample(&mut rng);
    }
    acc_bias[2] += 9.81;
    let gyr_bias: Vec<f64> = (0..3).map(|_| 0.05 * unit.sample(&mut rng)).collect();
    let hr_base = 72.0 + 6.0 * unit.sample(&mut rng);
    let baseline_end = stages[0].end_ms;
    let gaps: Vec<(i64, i64)> = (0..config.hr_gaps)
        .filter(|_| end_ms - baseline_end > 200_000)
        .map(|_| {
            let start = rng.gen_range(baseline_end..end_ms - 180_000);
            (start, start + rng.gen_range(60_000..=180_000))
        })
        .collect();

    let period_ms = (1000.0 / config.sample_rate_hz).round() as i64;
    let n = (end_ms / period_ms) as usize;
    let mut samples = Vec::with_capacity(n);
    let mut hr_noise = 0.0;
    let mut hr_second: Option<f64> = None;
    let mut last_second = -1;
    for i in 0..n {
        let t = i as i64 * period_ms;
        let secs = t as f64 / 1000.0;
        let (m_ramp, inside) = event_influence(&events, t, MOTION_LEAD_MS);
        let level = config.signal * m_ramp + if inside { 2.0 } else { 0.0 };
        let wave = (2.0 * std::f64::consts::PI * 1.5 * secs).sin();

        let mut motion = [0.0; 6];
        for a in 0..3 {
            motion[a] = acc_bias[a] + 0.05 * unit.sample(&mut rng) + level * (0.4 * wave + 0.2 * unit.sample(&mut rng));
        }
        for g in 0..3 {
            motion[3 + g] = gyr_bias[g] + 0.03 * unit.sample(&mut rng) + level * 0.3 * unit.sample(&mut rng);
        }

        // heart rate updates once per second, like a wrist-worn optical sensor
        if t / 1000 != last_second {
            last_second = t / 1000;
            hr_noise = 0.8 * hr_noise + 0.6 * unit.sample(&mut rng);
            let (h_ramp, h_inside) = event_influence(&events, t, HR_LEAD_MS);
            let bpm = hr_base
                + stage_hr_offset(stage_at(&stages, t))
                + 2.0 * (2.0 * std::f64::consts::PI * secs / 200.0).sin()
                + hr_noise
                + 4.0 * config.signal * h_ramp
                + if h_inside { 3.0 } else { 0.0 };
            let dropped = rng.gen::<f64>() < config.hr_missing_rate || gaps.iter().any(|g| t >= g.0 && t < g.1);
            hr_second = (!dropped).then_some(round6(bpm));
        }
        samples.push(Sample {
            t_ms: t,
            motion: motion.map(round6),
            hr: hr_second,
        });
    }
    let recording = Recording::new(participant_id(index), samples, config.sample_rate_hz)?;
    assemble_session(recording, stages, events)
}

pub fn generate_dataset(config: &SynthConfig) -> Result<Vec<SessionBundle>, IngestError> {
    (0..config.participants).map(|i| generate_session(config, i)).collect()
}

/// Writes each session as `root/<participant>/`.
pub fn write_dataset(bundles: &[SessionBundle], root: &Path) -> Result<(), IngestError> {
    for b in bundles {
        write_session(b, &root.join(b.participant_id()))?;
    }
    Ok(())
}
