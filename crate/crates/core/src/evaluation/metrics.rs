//! Threshold-free and threshold-based binary classification metrics.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scores at or above this count as a positive prediction.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("labels contain no positives")]
    NoPositives,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(i));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Rows sorted by ascending score, grouped into runs of equal score. Each
/// group is `(score, positives, negatives)`.
fn score_groups(scores: &[f64], labels: &[u8], descending: bool) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let pos = usize::from(labels[i] == 1);
        match groups.last_mut() {
            Some(g) if g.0.partial_cmp(&scores[i]) == Some(Ordering::Equal) => {
                g.1 += pos;
                g.2 += 1 - pos;
            }
            _ => groups.push((scores[i], pos, 1 - pos)),
        }
    }
    groups
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(s+ > s-) + P(s+ = s-) / 2`.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClassLabels);
    }
    let mut neg_below = 0usize;
    let mut u = 0.0;
    for (_, pos, neg) in score_groups(scores, labels, false) {
        u += (pos * neg_below) as f64 + 0.5 * (pos * neg) as f64;
        neg_below += neg;
    }
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Confusion {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

/// Recall, precision and F1 at `threshold`. Precision is 0 with no
/// predicted positives; F1 is 0 when precision and recall are both 0.
pub fn recall_f1_confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics, MetricError> {
    let (n_pos, _) = check(scores, labels)?;
    if n_pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let c = Confusion::from_scores(scores, labels, threshold);
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ThresholdMetrics {
        recall,
        precision,
        f1,
        confusion: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>=` this are called positive; `None` is the point above every
    /// score, i.e. (0, 0).
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from (0, 0) to (1, 1) with one point per distinct score.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>, MetricError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClassLabels);
    }
    let mut points = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (score, pos, neg) in score_groups(scores, labels, true) {
        tp += pos;
        fp += neg;
        points.push(RocPoint {
            threshold: Some(score),
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a polyline of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// CSV: `threshold,fpr,tpr`; the (0, 0) point has threshold `inf`.
pub fn write_roc_csv<W: std::io::Write>(points: &[RocPoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        w.write_record([
            p.threshold.map(|t| format!("{t:.6}")).unwrap_or_else(|| "inf".into()),
            format!("{:.6}", p.fpr),
            format!("{:.6}", p.tpr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.2], &[1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]), Err(MetricError::SingleClassLabels));
    }

    #[test]
    fn threshold_metrics() {
        let m = recall_f1_confusion(&[0.9, 0.7, 0.1, 0.2], &[1, 1, 0, 0], 0.5).unwrap();
        assert_eq!((m.recall, m.f1), (1.0, 1.0));

        // precision 1, recall 1/2
        let m = recall_f1_confusion(&[0.9, 0.1, 0.1, 0.2], &[1, 1, 0, 0], 0.5).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);

        let m = recall_f1_confusion(&[0.1, 0.1, 0.1], &[1, 0, 1], 0.5).unwrap();
        assert_eq!((m.recall, m.f1), (0.0, 0.0));
        assert_eq!(m.confusion.total(), 3);

        // threshold is inclusive
        let m = recall_f1_confusion(&[0.5], &[1], 0.5).unwrap();
        assert_eq!(m.confusion.tp, 1);

        assert_eq!(recall_f1_confusion(&[0.3], &[0], 0.5), Err(MetricError::NoPositives));
    }

    #[test]
    fn roc_perfect_separation() {
        let pts = roc_points(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert!(pts.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(trapezoid_area(&pts), 1.0);
    }

    #[test]
    fn roc_area_matches_auc_with_ties() {
        let s = [0.3, 0.3, 0.5, 0.1, 0.5, 0.9];
        let l = [1, 0, 0, 1, 1, 0];
        let pts = roc_points(&s, &l).unwrap();
        assert!((trapezoid_area(&pts) - auc(&s, &l).unwrap()).abs() < 1e-12);
    }
}
