//! Gradient-boosted regression trees on the binary log-loss.
//!
//! Starts from the log-odds of the base rate; every round fits a depth-limited
//! tree to the residuals `y - sigmoid(F)` and adds it with shrinkage.

use rand::rngs::mock::StepRng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{grow, GrowParams, Residuals, Tree};
use super::{FeatureMatrix, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_split: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_split: 2,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidHyperparameter(what.to_string()));
        if self.n_trees == 0 {
            return bad("boost.n_trees must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("boost.max_depth must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("boost.learning_rate must be in (0, 1]");
        }
        if self.min_samples_split < 2 {
            return bad("boost.min_samples_split must be >= 2");
        }
        Ok(())
    }
}

/// Base-rate clamp so a one-class training set keeps a finite log-odds.
const RATE_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoost {
    pub params: BoostParams,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Squared-error decrease per feature, normalized to sum 1.
    pub importances: Vec<f64>,
}

impl GradientBoost {
    pub fn fit(x: &FeatureMatrix, y: &[u8], params: BoostParams) -> GradientBoost {
        let n = x.n_rows();
        let rate = (y.iter().filter(|&&v| v == 1).count() as f64 / n as f64).clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
        let base_score = (rate / (1.0 - rate)).ln();
        let grow_params = GrowParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: None,
        };
        // no subsampling, so the generator is never drawn
        let mut rng = StepRng::new(0, 0);

        let mut margin = vec![base_score; n];
        let mut importances = vec![0.0; x.n_cols()];
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut residual = vec![0.0; n];
        let mut hessian = vec![0.0; n];
        for _ in 0..params.n_trees {
            for i in 0..n {
                let p = sigmoid(margin[i]);
                residual[i] = f64::from(y[i]) - p;
                hessian[i] = p * (1.0 - p);
            }
            let target = Residuals {
                residual: &residual,
                hessian: &hessian,
            };
            let tree = grow(x, &target, (0..n).collect(), &grow_params, &mut rng, &mut importances);
            for (m, row) in margin.iter_mut().zip(x.rows()) {
                *m += params.learning_rate * tree.predict_row(row);
            }
            trees.push(tree);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        GradientBoost {
            params,
            base_score,
            trees,
            importances,
        }
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.params.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_score_is_log_odds() {
        let x = FeatureMatrix::new(vec!["a".into()], vec![vec![0.0]; 4]);
        let m = GradientBoost::fit(&x, &[1, 0, 0, 0], BoostParams::default());
        assert!((m.base_score - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        // constant feature: every tree is a single leaf of zero residual sum
        assert!((m.predict_proba(&[0.0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fits_a_step() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i >= 12)).collect();
        let x = FeatureMatrix::new(vec!["a".into()], rows.clone());
        let m = GradientBoost::fit(&x, &y, BoostParams::default());
        for (row, &yi) in rows.iter().zip(&y) {
            assert_eq!(u8::from(m.predict_proba(row) >= 0.5), yi);
        }
        assert!((m.importances[0] - 1.0).abs() < 1e-12);
    }
}
