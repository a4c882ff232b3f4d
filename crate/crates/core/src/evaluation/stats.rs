//! Dataset-level descriptive statistics: behavior prevalence, per-stage heart
//! rate and behavior counts, per-participant behavior summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{Behavior, SessionBundle, Stage};
use crate::preprocess::prepare_session;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub behavior: Behavior,
    pub count: usize,
    /// Fraction of all labeled behaviors; `None` when there are none.
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: Stage,
    pub sessions: usize,
    pub duration_ms: i64,
    /// Pooled mean of Baseline-I-normalized heart rate.
    pub mean_normalized_hr: Option<f64>,
    pub hr_samples: usize,
    /// Behaviors whose onset falls inside the stage.
    pub behavior_count: usize,
    pub by_behavior: BTreeMap<Behavior, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationSummary {
    pub mean_s: f64,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl DurationSummary {
    fn of(durations_ms: &[i64]) -> Option<Self> {
        if durations_ms.is_empty() {
            return None;
        }
        let mut s: Vec<f64> = durations_ms.iter().map(|&d| d as f64 / 1000.0).collect();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median_s = if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        };
        Some(DurationSummary {
            mean_s: s.iter().sum::<f64>() / n as f64,
            median_s,
            min_s: s[0],
            max_s: s[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub participant: String,
    pub recording_ms: i64,
    pub behavior_count: usize,
    pub by_behavior: BTreeMap<Behavior, usize>,
    pub durations: Option<DurationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveReport {
    pub sessions: usize,
    pub total_behaviors: usize,
    /// Sorted by decreasing count.
    pub prevalence: Vec<PrevalenceRow>,
    pub stages: Vec<StageRow>,
    pub participants: Vec<ParticipantRow>,
    /// Sessions whose heart rate could not be normalized and is left out of
    /// the per-stage heart-rate means.
    pub unnormalized_sessions: Vec<String>,
}

pub fn descriptive_stats_report(bundles: &[SessionBundle]) -> DescriptiveReport {
    let mut totals: BTreeMap<Behavior, usize> = Behavior::ALL.iter().map(|b| (*b, 0)).collect();
    let mut stage_rows: Vec<StageRow> = Stage::ALL
        .iter()
        .map(|&stage| StageRow {
            stage,
            sessions: 0,
            duration_ms: 0,
            mean_normalized_hr: None,
            hr_samples: 0,
            behavior_count: 0,
            by_behavior: BTreeMap::new(),
        })
        .collect();
    let mut hr_sums = vec![0.0; Stage::ALL.len()];
    let mut participants = Vec::with_capacity(bundles.len());
    let mut unnormalized = Vec::new();

    for bundle in bundles {
        let events = bundle.events();
        let mut by_behavior = BTreeMap::new();
        for e in events {
            *totals.entry(e.behavior).or_default() += 1;
            *by_behavior.entry(e.behavior).or_default() += 1;
        }
        let durations: Vec<i64> = events.iter().map(|e| e.duration_ms()).collect();
        participants.push(ParticipantRow {
            participant: bundle.participant_id().to_string(),
            recording_ms: bundle.recording().duration_ms(),
            behavior_count: events.len(),
            by_behavior,
            durations: DurationSummary::of(&durations),
        });

        let normalized = match prepare_session(bundle) {
            Ok(p) => Some(p.normalized),
            Err(_) => {
                unnormalized.push(bundle.participant_id().to_string());
                None
            }
        };
        for (i, row) in stage_rows.iter_mut().enumerate() {
            let Some(mark) = bundle.stage(row.stage) else {
                continue;
            };
            row.sessions += 1;
            row.duration_ms += mark.duration_ms();
            for e in events.iter().filter(|e| e.start_ms >= mark.start_ms && e.start_ms < mark.end_ms) {
                row.behavior_count += 1;
                *row.by_behavior.entry(e.behavior).or_default() += 1;
            }
            if let Some(norm) = &normalized {
                for s in norm.recording().slice(mark.start_ms, mark.end_ms) {
                    if let Some(hr) = s.hr {
                        hr_sums[i] += hr;
                        row.hr_samples += 1;
                    }
                }
            }
        }
    }
    for (row, sum) in stage_rows.iter_mut().zip(hr_sums) {
        if row.hr_samples > 0 {
            row.mean_normalized_hr = Some(sum / row.hr_samples as f64);
        }
    }

    let total: usize = totals.values().sum();
    let mut prevalence: Vec<PrevalenceRow> = Behavior::ALL
        .iter()
        .map(|&b| PrevalenceRow {
            behavior: b,
            count: totals[&b],
            share: (total > 0).then(|| totals[&b] as f64 / total as f64),
        })
        .collect();
    // stable sort keeps the canonical behavior order among equal counts
    prevalence.sort_by(|a, b| b.count.cmp(&a.count));

    DescriptiveReport {
        sessions: bundles.len(),
        total_behaviors: total,
        prevalence,
        stages: stage_rows,
        participants,
        unnormalized_sessions: unnormalized,
    }
}

/// Six decimals; values that round to zero print without a sign.
fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| {
        let s = format!("{x:.6}");
        if s == "-0.000000" {
            s[1..].to_string()
        } else {
            s
        }
    })
    .unwrap_or_default()
}

impl DescriptiveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `behavior,count,share_percent`
    pub fn write_prevalence_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["behavior", "count", "share_percent"])?;
        for r in &self.prevalence {
            w.write_record([
                r.behavior.name().to_string(),
                r.count.to_string(),
                r.share.map(|s| format!("{:.1}", s * 100.0)).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per stage; one count column per behavior.
    pub fn write_stages_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["stage", "sessions", "duration_s", "mean_normalized_hr", "behavior_count"]
            .map(String::from)
            .to_vec();
        header.extend(Behavior::ALL.iter().map(|b| b.name().to_string()));
        w.write_record(&header)?;
        for r in &self.stages {
            let mut row = vec![
                r.stage.name().to_string(),
                r.sessions.to_string(),
                format!("{:.3}", r.duration_ms as f64 / 1000.0),
                fmt_opt(r.mean_normalized_hr),
                r.behavior_count.to_string(),
            ];
            row.extend(
                Behavior::ALL
                    .iter()
                    .map(|b| r.by_behavior.get(b).copied().unwrap_or(0).to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per participant; one count column per behavior.
    pub fn write_participants_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "participant",
            "recording_s",
            "behavior_count",
            "duration_mean_s",
            "duration_median_s",
            "duration_min_s",
            "duration_max_s",
        ]
        .map(String::from)
        .to_vec();
        header.extend(Behavior::ALL.iter().map(|b| b.name().to_string()));
        w.write_record(&header)?;
        for r in &self.participants {
            let d = r.durations;
            let mut row = vec![
                r.participant.clone(),
                format!("{:.3}", r.recording_ms as f64 / 1000.0),
                r.behavior_count.to_string(),
                fmt_opt(d.map(|d| d.mean_s)),
                fmt_opt(d.map(|d| d.median_s)),
                fmt_opt(d.map(|d| d.min_s)),
                fmt_opt(d.map(|d| d.max_s)),
            ];
            row.extend(
                Behavior::ALL
                    .iter()
                    .map(|b| r.by_behavior.get(b).copied().unwrap_or(0).to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        let d = DurationSummary::of(&[1000, 3000, 2000, 6000]).unwrap();
        assert_eq!((d.mean_s, d.median_s, d.min_s, d.max_s), (3.0, 2.5, 1.0, 6.0));
        assert!(DurationSummary::of(&[]).is_none());
    }

    #[test]
    fn empty_dataset() {
        let r = descriptive_stats_report(&[]);
        assert_eq!(r.total_behaviors, 0);
        assert!(r.prevalence.iter().all(|p| p.count == 0 && p.share.is_none()));
    }
}
