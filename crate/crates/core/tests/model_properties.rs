use bfrb_core::models::logistic::{gradient, objective};
use bfrb_core::models::tree::{best_gini_split, DecisionTree, GrowParams};
use bfrb_core::models::{
    feature_importances, predict_scores, train, FeatureMatrix, ForestParams, MaxFeatures, ModelConfig, ModelKind,
    RandomForest,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("accX{j}")).collect()
}

/// Small integer-valued matrices so ties and repeated values are common.
fn small_problem(max_n: usize, max_p: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (2..=max_n, 1..=max_p).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..5, p), n),
            prop::collection::vec(0u8..2, n),
        )
            .prop_map(|(rows, y)| {
                let rows = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                (rows, y)
            })
    })
}

/// Weighted child Gini of every candidate split; the optimum is the lowest
/// score, ties going to the lowest feature then the smallest threshold.
fn exhaustive_best(rows: &[Vec<f64>], y: &[u8]) -> Option<(usize, f64)> {
    let p = rows[0].len();
    let gini = |idx: &[usize]| {
        let n = idx.len() as f64;
        let pos = idx.iter().filter(|&&i| y[i] == 1).count() as f64;
        n * (1.0 - (pos / n).powi(2) - ((n - pos) / n).powi(2))
    };
    let mut candidates = Vec::new();
    for f in 0..p {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| rows[i][f] <= t);
            candidates.push((gini(&l) + gini(&r), f, t));
        }
    }
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .filter(|c| c.0 <= best + 1e-9)
        .map(|c| (c.1, c.2))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_matches_exhaustive_search((rows, y) in small_problem(12, 3)) {
        let p = rows[0].len();
        let x = FeatureMatrix::new(names(p), rows.clone());
        let idx: Vec<usize> = (0..rows.len()).collect();
        let features: Vec<usize> = (0..p).collect();
        let got = best_gini_split(&x, &y, &idx, &features).map(|s| (s.feature, s.threshold));
        prop_assert_eq!(got, exhaustive_best(&rows, &y));
    }

    #[test]
    fn one_tree_forest_is_the_tree((rows, y) in small_problem(30, 4), probes in prop::collection::vec(prop::collection::vec(-1.0f64..6.0, 4), 10)) {
        let p = rows[0].len();
        let x = FeatureMatrix::new(names(p), rows.clone());
        let tree = DecisionTree::fit(&x, &y, GrowParams { max_depth: 8, min_samples_split: 2, max_features: None });
        let params = ForestParams { n_trees: 1, max_features: MaxFeatures::All, bootstrap: false, ..ForestParams::default() };
        let forest = RandomForest::fit(&x, &y, params, 99);
        for row in rows.iter().cloned().chain(probes.into_iter().map(|r| r[..p].to_vec())) {
            prop_assert_eq!(forest.predict_score(&row), f64::from(tree.predict_class(&row)));
        }
    }

    #[test]
    fn training_is_deterministic((rows, mut y) in small_problem(30, 4), seed in any::<u64>()) {
        y[0] = 0;
        y[1] = 1;
        let x = FeatureMatrix::new(names(rows[0].len()), rows);
        for kind in ModelKind::ALL {
            let mut cfg = ModelConfig::new(kind, seed);
            cfg.forest.n_trees = 10;
            cfg.boost.n_trees = 10;
            let a = train(&cfg, &x, &y).unwrap();
            let b = train(&cfg, &x, &y).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
            let s = predict_scores(&a, &x).unwrap();
            prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..=30);
        let p = rng.gen_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let l2 = rng.gen_range(0.0..0.1);
        let (gw, gb) = gradient(&w, b, &rows, &y, l2);
        let h = 1e-6;
        let mut numeric = Vec::with_capacity(p + 1);
        for j in 0..p {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            numeric.push((objective(&up, b, &rows, &y, l2) - objective(&down, b, &rows, &y, l2)) / (2.0 * h));
        }
        numeric.push((objective(&w, b + h, &rows, &y, l2) - objective(&w, b - h, &rows, &y, l2)) / (2.0 * h));
        let analytic: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        assert!(diff / scale < 1e-5, "relative error {}", diff / scale);
    }
}

#[test]
fn logistic_cannot_fit_xor() {
    let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let y = [0, 1, 1, 0];
    let x = FeatureMatrix::new(names(2), rows);
    let m = train(&ModelConfig::new(ModelKind::Logistic, 0), &x, &y).unwrap();
    let s = predict_scores(&m, &x).unwrap();
    let correct = s.iter().zip(&y).filter(|(v, &t)| u8::from(**v >= 0.5) == t).count();
    assert!(correct <= 3);
    let tree = DecisionTree::fit(&x, &y, GrowParams { max_depth: 2, min_samples_split: 2, max_features: None });
    assert!(x.rows().iter().zip(&y).all(|(r, &t)| tree.predict_class(r) == t));
}

#[test]
fn forest_ranks_the_informative_feature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let y: Vec<u8> = rows.iter().map(|r| u8::from(r[2] > 0.5)).collect();
    let x = FeatureMatrix::new(names(5), rows);
    let m = train(&ModelConfig::new(ModelKind::RandomForest, 1), &x, &y).unwrap();
    let imp = feature_importances(&m);
    assert_eq!(imp.ranked()[0].0, "accX2");
    assert!(imp.features[2].1 > 0.9, "{:?}", imp.features);
}
