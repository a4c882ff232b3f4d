//! Cross-validation plans.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::mix_seed;

/// Each participant must hold at least this many vectors for stratified
/// splitting.
pub const MIN_STRATIFIED_SAMPLES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoldError {
    #[error("need at least 2 participants, found {0}")]
    TooFewParticipants(usize),
    #[error("participant `{0}` has fewer than 5 vectors")]
    TooFewSamples(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CvStrategy {
    /// Generic: each fold tests one held-out participant.
    LeaveOneUserOut,
    /// Personalized: every iteration holds out `ceil(test_fraction * n_p)`
    /// vectors of each participant.
    ParticipantStratified { test_fraction: f64, iterations: usize },
}

impl CvStrategy {
    pub const STRATIFIED: CvStrategy = CvStrategy::ParticipantStratified {
        test_fraction: 0.2,
        iterations: 10,
    };

    pub fn short_name(&self) -> &'static str {
        match self {
            CvStrategy::LeaveOneUserOut => "louo",
            CvStrategy::ParticipantStratified { .. } => "stratified",
        }
    }
}

impl fmt::Display for CvStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvStrategy::LeaveOneUserOut => f.write_str("louo"),
            CvStrategy::ParticipantStratified {
                test_fraction,
                iterations,
            } => write!(f, "stratified({test_fraction}, {iterations})"),
        }
    }
}

impl FromStr for CvStrategy {
    type Err = FoldError;

    /// `louo` / `generic`, or `stratified` / `personalized` with the default
    /// 20% x 10 iterations.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "louo" | "generic" | "leave-one-user-out" => Ok(CvStrategy::LeaveOneUserOut),
            "stratified" | "personalized" => Ok(CvStrategy::STRATIFIED),
            other => Err(FoldError::InvalidStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    /// Held-out participant (leave-one-user-out).
    pub participant: Option<String>,
    /// Iteration number (stratified).
    pub iteration: Option<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub strategy: CvStrategy,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Participants in order of first appearance, each with its row indices.
fn group_rows(groups: &[String]) -> Vec<(String, Vec<usize>)> {
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        match out.iter_mut().find(|(p, _)| p == g) {
            Some((_, rows)) => rows.push(i),
            None => out.push((g.clone(), vec![i])),
        }
    }
    out
}

/// Test-set size per participant: `ceil(fraction * n)`.
pub fn stratified_test_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction) - 1e-9).ceil().max(0.0) as usize
}

/// Plans folds over rows whose participant ids are `groups[i]`.
pub fn plan_folds(groups: &[String], strategy: CvStrategy, seed: u64) -> Result<FoldPlan, FoldError> {
    let by_participant = group_rows(groups);
    let n = groups.len();
    let folds = match strategy {
        CvStrategy::LeaveOneUserOut => {
            if by_participant.len() < 2 {
                return Err(FoldError::TooFewParticipants(by_participant.len()));
            }
            by_participant
                .iter()
                .enumerate()
                .map(|(k, (p, test))| Fold {
                    index: k,
                    participant: Some(p.clone()),
                    iteration: None,
                    train: (0..n).filter(|i| groups[*i] != *p).collect(),
                    test: test.clone(),
                })
                .collect()
        }
        CvStrategy::ParticipantStratified {
            test_fraction,
            iterations,
        } => {
            if !(test_fraction > 0.0 && test_fraction < 1.0) || iterations == 0 {
                return Err(FoldError::InvalidStrategy(strategy.to_string()));
            }
            if by_participant.is_empty() {
                return Err(FoldError::TooFewParticipants(0));
            }
            if let Some((p, _)) = by_participant.iter().find(|(_, r)| r.len() < MIN_STRATIFIED_SAMPLES) {
                return Err(FoldError::TooFewSamples(p.clone()));
            }
            (0..iterations)
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, k as u64));
                    let mut in_test = vec![false; n];
                    for (_, rows) in &by_participant {
                        let m = stratified_test_size(rows.len(), test_fraction);
                        for j in index::sample(&mut rng, rows.len(), m) {
                            in_test[rows[j]] = true;
                        }
                    }
                    Fold {
                        index: k,
                        participant: None,
                        iteration: Some(k),
                        train: (0..n).filter(|&i| !in_test[i]).collect(),
                        test: (0..n).filter(|&i| in_test[i]).collect(),
                    }
                })
                .collect()
        }
    };
    Ok(FoldPlan { strategy, seed, folds })
}
