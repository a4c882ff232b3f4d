//! L2-regularized logistic regression trained by full-batch gradient descent.
//!
//! Features are standardized with the training-set mean and std before
//! descent, so one learning rate works across feature scales. The objective
//! over standardized inputs `z` is
//!
//! `J(w, b) = mean_i [softplus(w.z_i + b) - y_i (w.z_i + b)] + (l2 / 2) |w|^2`
//!
//! with the intercept left unpenalized.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient component falls below this.
    pub tol: f64,
    pub fit_intercept: bool,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.1,
            l2: 1e-4,
            max_iter: 5000,
            tol: 1e-6,
            fit_intercept: true,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidHyperparameter(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("logistic.learning_rate must be > 0");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("logistic.l2 must be >= 0");
        }
        if self.max_iter == 0 {
            return bad("logistic.max_iter must be >= 1");
        }
        if !(self.tol > 0.0) {
            return bad("logistic.tol must be > 0");
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(w: &[f64], b: f64, row: &[f64]) -> f64 {
    b + w.iter().zip(row).map(|(wi, xi)| wi * xi).sum::<f64>()
}

/// Regularized mean log-loss.
pub fn objective(w: &[f64], b: f64, rows: &[Vec<f64>], y: &[u8], l2: f64) -> f64 {
    let n = rows.len() as f64;
    let data: f64 = rows
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z = linear(w, b, row);
            softplus(z) - f64::from(yi) * z
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of [`objective`] with respect to `(w, b)`.
pub fn gradient(w: &[f64], b: f64, rows: &[Vec<f64>], y: &[u8], l2: f64) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let err = sigmoid(linear(w, b, row)) - f64::from(yi);
        gb += err;
        for (g, x) in gw.iter_mut().zip(row) {
            *g += err * x;
        }
    }
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    (gw, gb / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &FeatureMatrix) -> Standardizer {
        let n = x.n_rows() as f64;
        let p = x.n_cols();
        let mut mean = vec![0.0; p];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub params: LogisticParams,
    pub standardizer: Standardizer,
    /// Coefficients on standardized features.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn fit(x: &FeatureMatrix, y: &[u8], params: LogisticParams) -> Result<LogisticModel, ModelError> {
        let positives = y.iter().filter(|&&v| v == 1).count();
        if positives == 0 || positives == y.len() {
            return Err(ModelError::SingleClassInput);
        }
        let standardizer = Standardizer::fit(x);
        let rows: Vec<Vec<f64>> = x.rows().iter().map(|r| standardizer.apply(r)).collect();

        let mut w = vec![0.0; x.n_cols()];
        let mut b = 0.0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < params.max_iter {
            let (gw, gb) = gradient(&w, b, &rows, y, params.l2);
            let gb = if params.fit_intercept { gb } else { 0.0 };
            let max_g = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
            if max_g < params.tol {
                converged = true;
                break;
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= params.learning_rate * g;
            }
            b -= params.learning_rate * gb;
            iterations += 1;
        }
        Ok(LogisticModel {
            params,
            standardizer,
            weights: w,
            intercept: b,
            iterations,
            converged,
        })
    }

    pub fn decision_function(&self, row: &[f64]) -> f64 {
        linear(&self.weights, self.intercept, &self.standardizer.apply(row))
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision_function(row))
    }

    /// Coefficients mapped back to the raw feature scale.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let w: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.standardizer.scale)
            .map(|(w, s)| w / s)
            .collect();
        let b = self.intercept - w.iter().zip(&self.standardizer.mean).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let p = rows[0].len();
        FeatureMatrix::new((0..p).map(|i| format!("f{i}")).collect(), rows)
    }

    #[test]
    fn sigmoid_limits() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let x = matrix(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            LogisticModel::fit(&x, &[1, 1], LogisticParams::default()),
            Err(ModelError::SingleClassInput)
        ));
    }

    #[test]
    fn learns_a_threshold() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let m = LogisticModel::fit(&matrix(rows.clone()), &y, LogisticParams::default()).unwrap();
        for (row, &yi) in rows.iter().zip(&y) {
            assert_eq!(u8::from(m.predict_proba(row) >= 0.5), yi);
        }
        assert!(m.weights[0].abs() > m.weights[1].abs());
        let (w, b) = m.raw_coefficients();
        let z = b + w[0] * 7.0 + w[1] * 1.0;
        assert!((z - m.decision_function(&[7.0, 1.0])).abs() < 1e-9);
    }

    #[test]
    fn converges_on_overlapping_classes() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 7) as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let m = LogisticModel::fit(&matrix(rows), &y, LogisticParams::default()).unwrap();
        assert!(m.converged, "{} iterations", m.iterations);
    }
}
