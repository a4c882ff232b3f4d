//! Axis-aligned binary trees shared by the forest and the booster.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature; rows with `x <= threshold` go left. Among equally good splits
//! the lowest feature index wins, then the smallest threshold.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in depth-first order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Impurity decrease weighted by node size.
    pub decrease: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Sorts `idx` by feature `f` (stable, so duplicates keep bootstrap order).
fn sorted_by(x: &FeatureMatrix, idx: &[usize], f: usize) -> Vec<usize> {
    let mut order = idx.to_vec();
    order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
    order
}

/// Weighted child Gini as an exact fraction `num / den`, scaled by `n / 2`:
/// `pl*ql/nl + pr*qr/nr == (pl*ql*nr + pr*qr*nl) / (nl*nr)`.
fn gini_children(pl: u64, nl: u64, pr: u64, nr: u64) -> (u128, u128) {
    let ql = (nl - pl) as u128;
    let qr = (nr - pr) as u128;
    let num = pl as u128 * ql * nr as u128 + pr as u128 * qr * nl as u128;
    (num, nl as u128 * nr as u128)
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Best Gini split of the rows `idx` over `features` (ascending). `None` when
/// every candidate feature is constant over the rows.
pub fn best_gini_split(x: &FeatureMatrix, y: &[u8], idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| y[i] == 1).count();
    let mut best: Option<(SplitChoice, (u128, u128))> = None;
    for &f in features {
        let order = sorted_by(x, idx, f);
        let mut pl = 0usize;
        for k in 1..n {
            pl += usize::from(y[order[k - 1]] == 1);
            let (a, b) = (x.get(order[k - 1], f), x.get(order[k], f));
            if a >= b {
                continue;
            }
            let score = gini_children(pl as u64, k as u64, (total_pos - pl) as u64, (n - k) as u64);
            let better = match &best {
                None => true,
                Some((_, s)) => score.0 * s.1 < s.0 * score.1,
            };
            if better {
                let decrease = n as f64 * gini(total_pos, n)
                    - k as f64 * gini(pl, k)
                    - (n - k) as f64 * gini(total_pos - pl, n - k);
                best = Some((
                    SplitChoice {
                        feature: f,
                        threshold: midpoint(a, b),
                        decrease: decrease.max(0.0),
                    },
                    score,
                ));
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Best squared-error split for residual targets `r`.
pub fn best_variance_split(x: &FeatureMatrix, r: &[f64], idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| r[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(SplitChoice, f64)> = None;
    for &f in features {
        let order = sorted_by(x, idx, f);
        let mut left = 0.0;
        for k in 1..n {
            left += r[order[k - 1]];
            let (a, b) = (x.get(order[k - 1], f), x.get(order[k], f));
            if a >= b {
                continue;
            }
            let right = total - left;
            let gain = left * left / k as f64 + right * right / (n - k) as f64;
            if best.as_ref().is_none_or(|(_, g)| gain > *g) {
                best = Some((
                    SplitChoice {
                        feature: f,
                        threshold: midpoint(a, b),
                        decrease: (gain - parent).max(0.0),
                    },
                    gain,
                ));
            }
        }
    }
    best.map(|(c, _)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` uses all.
    pub max_features: Option<usize>,
}

/// What the grower needs from a learning target.
pub(crate) trait Target {
    fn is_pure(&self, idx: &[usize]) -> bool;
    fn leaf_value(&self, idx: &[usize]) -> f64;
    fn best_split(&self, x: &FeatureMatrix, idx: &[usize], features: &[usize]) -> Option<SplitChoice>;
}

pub(crate) struct Binary<'a>(pub &'a [u8]);

impl Target for Binary<'_> {
    fn is_pure(&self, idx: &[usize]) -> bool {
        let pos = idx.iter().filter(|&&i| self.0[i] == 1).count();
        pos == 0 || pos == idx.len()
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().filter(|&&i| self.0[i] == 1).count() as f64 / idx.len() as f64
    }

    fn best_split(&self, x: &FeatureMatrix, idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
        best_gini_split(x, self.0, idx, features)
    }
}

/// Log-loss residuals `y - p` with hessians `p (1 - p)`; leaves take a
/// single Newton step.
pub(crate) struct Residuals<'a> {
    pub residual: &'a [f64],
    pub hessian: &'a [f64],
}

impl Target for Residuals<'_> {
    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.residual[idx[0]];
        idx.iter().all(|&i| self.residual[i] == first)
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let num: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let den: f64 = idx.iter().map(|&i| self.hessian[i]).sum();
        if den.abs() < 1e-150 {
            0.0
        } else {
            num / den
        }
    }

    fn best_split(&self, x: &FeatureMatrix, idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
        best_variance_split(x, self.residual, idx, features)
    }
}

/// Grows a tree depth-first (left subtree before right). The RNG is drawn
/// only for per-node feature subsets, in node visiting order.
pub(crate) fn grow<T: Target, R: Rng>(
    x: &FeatureMatrix,
    target: &T,
    idx: Vec<usize>,
    params: &GrowParams,
    rng: &mut R,
    importances: &mut [f64],
) -> Tree {
    let mut nodes = Vec::new();
    grow_node(x, target, idx, 0, params, rng, importances, &mut nodes);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_node<T: Target, R: Rng>(
    x: &FeatureMatrix,
    target: &T,
    idx: Vec<usize>,
    depth: usize,
    params: &GrowParams,
    rng: &mut R,
    importances: &mut [f64],
    nodes: &mut Vec<Node>,
) -> usize {
    let me = nodes.len();
    let leaf = Node::Leaf {
        value: target.leaf_value(&idx),
        samples: idx.len(),
    };
    nodes.push(leaf);
    if depth >= params.max_depth || idx.len() < params.min_samples_split.max(2) || target.is_pure(&idx) {
        return me;
    }
    let p = x.n_cols();
    let features: Vec<usize> = match params.max_features {
        Some(m) if m < p => {
            let mut f = index::sample(rng, p, m.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    };
    let Some(split) = target.best_split(x, &idx, &features) else {
        return me;
    };
    let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| x.get(i, split.feature) <= split.threshold);
    importances[split.feature] += split.decrease;
    let left = grow_node(x, target, l_idx, depth + 1, params, rng, importances, nodes);
    let right = grow_node(x, target, r_idx, depth + 1, params, rng, importances, nodes);
    nodes[me] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    me
}

/// A single CART classification tree on all rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub params: GrowParams,
    pub tree: Tree,
    /// Raw (unnormalized) impurity decrease per feature.
    pub impurity_decrease: Vec<f64>,
}

impl DecisionTree {
    pub fn fit(x: &FeatureMatrix, y: &[u8], params: GrowParams) -> DecisionTree {
        let mut importances = vec![0.0; x.n_cols()];
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let params = GrowParams {
            max_features: None,
            ..params
        };
        let tree = grow(x, &Binary(y), (0..x.n_rows()).collect(), &params, &mut rng, &mut importances);
        DecisionTree {
            params,
            tree,
            impurity_decrease: importances,
        }
    }

    /// Fraction of positive training rows in the reached leaf.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.tree.predict_row(row)
    }

    pub fn predict_class(&self, row: &[f64]) -> u8 {
        u8::from(self.predict_proba(row) >= 0.5)
    }
}
