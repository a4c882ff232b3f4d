//! Bootstrap-bagged Gini trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Binary, GrowParams, Tree};
use super::{FeatureMatrix, ModelError};
use crate::util::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(p))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k.clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    /// Draw `n` rows with replacement per tree; otherwise every tree sees
    /// every row once.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 8,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidHyperparameter(what.to_string()));
        if self.n_trees == 0 {
            return bad("forest.n_trees must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("forest.max_depth must be >= 1");
        }
        if self.min_samples_split < 2 {
            return bad("forest.min_samples_split must be >= 2");
        }
        if self.max_features == MaxFeatures::Count(0) {
            return bad("forest.max_features must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    /// Mean over trees of each tree's normalized impurity decrease.
    pub importances: Vec<f64>,
}

impl RandomForest {
    /// Tree `k` uses its own generator seeded from `(seed, k)`: bootstrap
    /// draws first, then feature subsets in depth-first node order. Trees can
    /// therefore be grown in parallel without changing the result.
    pub fn fit(x: &FeatureMatrix, y: &[u8], params: ForestParams, seed: u64) -> RandomForest {
        let n = x.n_rows();
        let p = x.n_cols();
        let grow_params = GrowParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: Some(params.max_features.resolve(p)),
        };
        let grown: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, k as u64));
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut imp = vec![0.0; p];
                let tree = grow(x, &Binary(y), idx, &grow_params, &mut rng, &mut imp);
                (tree, imp)
            })
            .collect();

        let mut importances = vec![0.0; p];
        let mut trees = Vec::with_capacity(grown.len());
        for (tree, imp) in grown {
            let total: f64 = imp.iter().sum();
            if total > 0.0 {
                for (acc, v) in importances.iter_mut().zip(&imp) {
                    *acc += v / total;
                }
            }
            trees.push(tree);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        RandomForest {
            params,
            trees,
            importances,
        }
    }

    /// Fraction of trees whose leaf is majority positive.
    pub fn predict_score(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict_row(row) >= 0.5).count();
        votes as f64 / self.trees.len() as f64
    }

    pub fn predict_class(&self, row: &[f64]) -> u8 {
        u8::from(self.predict_score(row) >= 0.5)
    }
}
