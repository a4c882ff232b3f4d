#![allow(dead_code)]

use bfrb_core::synth::SynthConfig;

/// A short protocol run (about 11 minutes) for property tests.
pub fn small_synth(seed: u64, participants: usize, events: usize) -> SynthConfig {
    SynthConfig {
        participants,
        stage_seconds: [120, 60, 120, 60, 240, 60],
        events_per_session: events,
        seed,
        ..SynthConfig::default()
    }
}

/// Pair counting over every (positive, negative) pair.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Root mean square of successive differences, written out directly.
pub fn direct_rmssd(rr: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..rr.len() - 1 {
        let d = rr[i] - rr[i + 1];
        acc += d * d;
    }
    (acc / (rr.len() - 1) as f64).sqrt()
}
