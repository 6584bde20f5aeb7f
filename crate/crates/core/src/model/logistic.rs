//! Binary logistic regression trained by full-batch gradient descent, and a
//! one-vs-rest wrapper for the four scene classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    /// L2 penalty on the weights (not the bias).
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the gradient's infinity norm falls below this.
    pub tolerance: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            lambda: 1e-4,
            learning_rate: 0.1,
            max_iters: 500,
            tolerance: 1e-6,
        }
    }
}

/// Per-feature z-score parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub mean: f64,
    pub sd: f64,
}

/// Fits means and population standard deviations. Constant features get
/// `sd = 1` so they map to zero.
pub fn fit_standardization(rows: &[Vec<f64>]) -> Vec<FeatureScale> {
    let Some(d) = rows.first().map(Vec::len) else {
        return Vec::new();
    };
    let n = rows.len() as f64;
    (0..d)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            FeatureScale {
                mean,
                sd: if sd > 1e-12 { sd } else { 1.0 },
            }
        })
        .collect()
}

pub fn standardize(row: &[f64], scales: &[FeatureScale]) -> Vec<f64> {
    row.iter().zip(scales).map(|(v, s)| (v - s.mean) / s.sd).collect()
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

/// Mean cross-entropy plus `lambda/2 * |w|^2` over standardized rows.
pub struct Objective<'a> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(rows: &'a [Vec<f64>], targets: &'a [f64], lambda: f64) -> Self {
        Objective { rows, targets, lambda }
    }

    fn logit(row: &[f64], weights: &[f64], bias: f64) -> f64 {
        row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias
    }

    pub fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        let n = self.rows.len() as f64;
        let data: f64 = self
            .rows
            .iter()
            .zip(self.targets)
            .map(|(row, &y)| {
                let z = Self::logit(row, weights, bias);
                softplus(z) - y * z
            })
            .sum();
        data / n + 0.5 * self.lambda * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Returns `(loss, dL/dw, dL/db)`.
    pub fn loss_and_gradient(&self, weights: &[f64], bias: f64) -> (f64, Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut grad = vec![0.0; weights.len()];
        let mut grad_b = 0.0;
        let mut data = 0.0;
        for (row, &y) in self.rows.iter().zip(self.targets) {
            let z = Self::logit(row, weights, bias);
            data += softplus(z) - y * z;
            let residual = sigmoid(z) - y;
            for (g, x) in grad.iter_mut().zip(row) {
                *g += residual * x;
            }
            grad_b += residual;
        }
        let mut penalty = 0.0;
        for (g, w) in grad.iter_mut().zip(weights) {
            *g = *g / n + self.lambda * w;
            penalty += w * w;
        }
        (data / n + 0.5 * self.lambda * penalty, grad, grad_b / n)
    }
}

/// A fitted binary classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Vec<FeatureScale>,
    pub target: String,
}

impl LinearModel {
    /// The all-zero model over `d` features.
    pub fn zeros(d: usize, target: impl Into<String>) -> Self {
        LinearModel {
            weights: vec![0.0; d],
            bias: 0.0,
            standardization: vec![FeatureScale { mean: 0.0, sd: 1.0 }; d],
            target: target.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w . standardize(x) + b`.
    pub fn decision(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        let z = standardize(row, &self.standardization);
        Ok(Objective::logit(&z, &self.weights, self.bias))
    }

    pub fn probability(&self, row: &[f64]) -> Result<f64> {
        self.decision(row).map(sigmoid)
    }
}

/// Probability and hard label (positive when `p >= 0.5`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: bool,
}

pub fn predict(model: &LinearModel, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
    rows.iter()
        .map(|r| {
            let p = model.probability(r)?;
            Ok(Prediction {
                probability: p,
                label: p >= 0.5,
            })
        })
        .collect()
}

/// Optimizer trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    /// Loss before the first step and after every accepted step.
    pub losses: Vec<f64>,
}

/// Fits a regularized logistic regression from zero-initialized weights.
///
/// Each iteration tries the configured learning rate and halves it until the
/// loss does not increase, so the loss trace is non-increasing even when the
/// default step is too long for strongly correlated features.
pub fn train_logistic(
    rows: &[Vec<f64>],
    labels: &[bool],
    target: &str,
    hyper: &Hyper,
) -> Result<(LinearModel, TrainReport)> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Training(format!(
            "{target}: training set has a single class ({positives} positive, {negatives} negative)"
        )));
    }
    if positives < 2 || negatives < 2 {
        return Err(Error::Training(format!(
            "{target}: need at least 2 samples per class ({positives} positive, {negatives} negative)"
        )));
    }
    let d = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            actual: bad.len(),
        });
    }

    let scales = fit_standardization(rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r, &scales)).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let objective = Objective::new(&z, &y, hyper.lambda);

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let (mut loss, mut grad, mut grad_b) = objective.loss_and_gradient(&weights, bias);
    let mut losses = vec![loss];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < hyper.max_iters {
        let norm = grad.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if norm < hyper.tolerance {
            converged = true;
            break;
        }
        let mut step = hyper.learning_rate;
        let accepted = loop {
            let cand_w: Vec<f64> = weights.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let cand_b = bias - step * grad_b;
            let (cand_loss, cand_grad, cand_grad_b) = objective.loss_and_gradient(&cand_w, cand_b);
            if cand_loss <= loss {
                break Some((cand_w, cand_b, cand_loss, cand_grad, cand_grad_b));
            }
            step *= 0.5;
            if step < hyper.learning_rate * 1e-12 {
                break None;
            }
        };
        let Some((w, b, l, g, gb)) = accepted else {
            // no descent possible at machine precision
            converged = true;
            break;
        };
        weights = w;
        bias = b;
        loss = l;
        grad = g;
        grad_b = gb;
        losses.push(loss);
        iterations += 1;
    }

    Ok((
        LinearModel {
            weights,
            bias,
            standardization: scales,
            target: target.to_string(),
        },
        TrainReport {
            iterations,
            converged,
            losses,
        },
    ))
}

/// One binary model per class; the decision is the class with the largest
/// score (lowest index on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRest {
    pub models: Vec<LinearModel>,
}

impl OneVsRest {
    pub fn scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.decision(row)).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(row)?))
    }
}

/// Index of the largest value, first one on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn train_multiclass(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, hyper: &Hyper) -> Result<OneVsRest> {
    for c in 0..n_classes {
        if !labels.contains(&c) {
            return Err(Error::Training(format!("class {c} absent from training data")));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Training(format!("label {bad} outside 0..{n_classes}")));
    }
    let models = (0..n_classes)
        .map(|c| {
            let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            train_logistic(rows, &y, &format!("class_{c}"), hyper).map(|(m, _)| m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneVsRest { models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::metrics::evaluate_binary;
    use crate::rng::Lcg;

    #[test]
    fn zero_model_is_a_coin_flip() {
        let m = LinearModel::zeros(3, "t");
        let p = predict(&m, &[vec![1.0, -2.0, 5.0]]).unwrap();
        assert_eq!(p[0].probability, 0.5);
        assert!(p[0].label);
    }

    #[test]
    fn saturated_bias() {
        let mut m = LinearModel::zeros(1, "t");
        m.bias = 100.0;
        assert!(m.probability(&[0.0]).unwrap() > 0.999);
    }

    #[test]
    fn dimension_mismatch() {
        let m = LinearModel::zeros(2, "t");
        assert!(matches!(m.decision(&[1.0]), Err(Error::Dimension { .. })));
    }

    fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
        let xs = [-3.0, -2.5, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 2.5, 3.0];
        (
            xs.iter().map(|&x| vec![x]).collect(),
            xs.iter().map(|&x| x > 0.0).collect(),
        )
    }

    #[test]
    fn separable_toy_is_fit_perfectly() {
        let (x, y) = separable();
        let (model, report) = train_logistic(&x, &y, "toy", &Hyper::default()).unwrap();
        let pred: Vec<bool> = predict(&model, &x).unwrap().iter().map(|p| p.label).collect();
        assert_eq!(evaluate_binary(&pred, &y).unwrap().positive().f1, 1.0);
        assert!(report.losses.windows(2).all(|w| w[1] <= w[0]));

        let held_out = vec![vec![-4.0], vec![-1.2], vec![1.2], vec![4.0]];
        let labels: Vec<bool> = predict(&model, &held_out).unwrap().iter().map(|p| p.label).collect();
        assert_eq!(labels, [false, false, true, true]);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0]; 4];
        assert!(train_logistic(&x, &[true; 4], "t", &Hyper::default()).is_err());
        assert!(train_logistic(&x, &[true, true, true, false], "t", &Hyper::default()).is_err());
    }

    #[test]
    fn standardized_training_features() {
        let mut rng = Lcg::new(4);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.next_f64() * 10.0 + 3.0, 7.0, rng.next_f64() - 0.5])
            .collect();
        let scales = fit_standardization(&rows);
        assert_eq!(scales[1].sd, 1.0);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| standardize(r, &scales)).collect();
        for j in [0, 2] {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / 50.0;
            let sd = (z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 50.0).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_agrees_with_finite_differences() {
        let mut rng = Lcg::new(21);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<f64> = (0..30).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
        let w: Vec<f64> = (0..4).map(|_| rng.next_f64() - 0.5).collect();
        let b = 0.3;
        let obj = Objective::new(&rows, &y, 0.01);
        let (_, g, gb) = obj.loss_and_gradient(&w, b);
        let h = 1e-5;
        for j in 0..4 {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (obj.loss(&plus, b) - obj.loss(&minus, b)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1e-3));
        }
        let fd_b = (obj.loss(&w, b + h) - obj.loss(&w, b - h)) / (2.0 * h);
        assert!((fd_b - gb).abs() <= 1e-6 * gb.abs().max(1e-3));
    }

    fn clusters(seed: u64, per_class: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers = [[-5.0, -5.0], [5.0, -5.0], [-5.0, 5.0], [5.0, 5.0]];
        let mut rng = Lcg::new(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                x.push(vec![center[0] + rng.next_f64() - 0.5, center[1] + rng.next_f64() - 0.5]);
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn separated_clusters_are_classified() {
        let (x, y) = clusters(1, 20);
        let model = train_multiclass(&x, &y, 4, &Hyper::default()).unwrap();
        let (tx, ty) = clusters(2, 10);
        for (row, &truth) in tx.iter().zip(&ty) {
            assert_eq!(model.predict(row).unwrap(), truth);
        }
    }

    #[test]
    fn uninformative_features_give_majority_class() {
        let labels: Vec<usize> = [vec![0; 10], vec![1; 50], vec![2; 20], vec![3; 20]].concat();
        let x = vec![vec![1.0, 2.0]; labels.len()];
        let model = train_multiclass(&x, &labels, 4, &Hyper::default()).unwrap();
        assert_eq!(model.predict(&[1.0, 2.0]).unwrap(), 1);
        assert_eq!(model.predict(&[-7.0, 0.5]).unwrap(), 1);
    }

    #[test]
    fn missing_class_rejected() {
        let (x, mut y) = clusters(1, 5);
        y.iter_mut().for_each(|l| *l = (*l).min(2));
        assert!(train_multiclass(&x, &y, 4, &Hyper::default()).is_err());
    }

    #[test]
    fn argmax_shift_invariant() {
        let s = [0.3, 2.0, -1.0, 2.0];
        assert_eq!(argmax(&s), 1);
        let shifted: Vec<f64> = s.iter().map(|v| v + 17.5).collect();
        assert_eq!(argmax(&shifted), argmax(&s));
    }
}
