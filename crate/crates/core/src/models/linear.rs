use super::{require_two_classes, sigmoid, Hyperparams, ModelError, Target};
use crate::linalg::solve_spd_with_jitter;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Ridge added to a singular Gram matrix, relative to its mean diagonal.
const GRAM_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressionModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearRegressionModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, row)
    }

    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), 1));
        for (i, row) in x.rows().into_iter().enumerate() {
            out[[i, 0]] = self.intercept + row.dot(&ndarray::ArrayView1::from(&self.coefficients));
        }
        out
    }
}

/// Least squares with intercept through the normal equations on centred data.
pub(crate) fn fit_linear_regression(x: ArrayView2<'_, f64>, target: &Target) -> Result<LinearRegressionModel, ModelError> {
    let Target::Values(y) = target else {
        return Err(ModelError::DegenerateTarget("linear regression needs numeric targets".into()));
    };
    let n = x.nrows();
    if n < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: n });
    }
    let p = x.ncols();
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = &x - &x_mean;
    let gram = xc.t().dot(&xc);
    let mut rhs = vec![0.0; p];
    for (i, row) in xc.rows().into_iter().enumerate() {
        let dy = y[i] - y_mean;
        for j in 0..p {
            rhs[j] += row[j] * dy;
        }
    }
    let coefficients = if p == 0 { Vec::new() } else { solve_spd_with_jitter(&gram, &rhs, GRAM_JITTER) };
    let intercept = y_mean - dot(&coefficients, x_mean.as_slice().expect("contiguous"));
    Ok(LinearRegressionModel { coefficients, intercept })
}

/// One linear scorer per class (a single scorer for two classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub n_classes: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Optimiser iterations per scorer.
    pub iterations: Vec<usize>,
}

impl LinearClassifier {
    /// Raw decision values `w·x + b`, one column per scorer.
    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.weights.len()));
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| row.to_vec());
            for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
                out[[i, k]] = dot(w, &row) + b;
            }
        }
        out
    }

    /// Binary: `[1 - σ(z), σ(z)]`. One-vs-rest: `σ(z_k)` normalised to sum to 1.
    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let z = self.decision_function(x);
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for i in 0..x.nrows() {
            if self.n_classes == 2 {
                let p = sigmoid(z[[i, 0]]);
                out[[i, 0]] = 1.0 - p;
                out[[i, 1]] = p;
            } else {
                let s: Vec<f64> = (0..self.n_classes).map(|k| sigmoid(z[[i, k]])).collect();
                let total: f64 = s.iter().sum();
                for k in 0..self.n_classes {
                    out[[i, k]] = if total > 0.0 { s[k] / total } else { 1.0 / self.n_classes as f64 };
                }
            }
        }
        out
    }
}

/// Binary targets per scorer: one column for two classes, one per class otherwise.
pub(crate) fn one_vs_rest(labels: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
    positives
        .into_iter()
        .map(|c| labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// L2-regularised mean log-loss and its gradient. `params` holds the weights
/// followed by the (unregularised) bias; `y` holds 0/1 targets.
pub fn logistic_objective(x: ArrayView2<'_, f64>, y: &[f64], params: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let (w, b) = params.split_at(p);
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for (i, row) in x.rows().into_iter().enumerate() {
        let mut z = b[0];
        for j in 0..p {
            z += w[j] * row[j];
        }
        // log(1 + e^z) - y z, stable for either sign of z
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y[i] * z;
        let r = sigmoid(z) - y[i];
        for j in 0..p {
            grad[j] += r * row[j];
        }
        grad[p] += r;
    }
    let inv = 1.0 / n as f64;
    loss *= inv;
    for g in &mut grad {
        *g *= inv;
    }
    for j in 0..p {
        loss += 0.5 * l2 * w[j] * w[j];
        grad[j] += l2 * w[j];
    }
    (loss, grad)
}

/// Gradient descent with Armijo backtracking. The trial step is the
/// Barzilai-Borwein step from the previous iterate, which keeps the
/// iteration count practical on poorly conditioned problems.
fn minimise_logistic(x: ArrayView2<'_, f64>, y: &[f64], l2: f64, max_iter: usize, tol: f64) -> (Vec<f64>, usize) {
    let dim = x.ncols() + 1;
    let mut params = vec![0.0; dim];
    let (mut loss, mut grad) = logistic_objective(x, y, &params, l2);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for iter in 0..max_iter {
        let gnorm_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm_inf < tol {
            return (params, iter);
        }
        if let Some((pp, pg)) = &prev {
            let s: Vec<f64> = params.iter().zip(pp).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = grad.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-10, 1e10);
            }
        }
        let g2 = dot(&grad, &grad);
        let mut t = step;
        let (next, next_loss, next_grad) = loop {
            let cand: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - t * g).collect();
            let (l, g) = logistic_objective(x, y, &cand, l2);
            if l <= loss - 1e-4 * t * g2 || t < 1e-16 {
                break (cand, l, g);
            }
            t *= 0.5;
        };
        prev = Some((std::mem::replace(&mut params, next), std::mem::replace(&mut grad, next_grad)));
        loss = next_loss;
        step = t;
    }
    (params, max_iter)
}

pub(crate) fn fit_logistic(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams) -> Result<LinearClassifier, ModelError> {
    let Target::Classes { labels, n_classes } = target else {
        return Err(ModelError::DegenerateTarget("logistic regression needs class labels".into()));
    };
    if x.nrows() < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: x.nrows() });
    }
    require_two_classes(labels)?;
    let l2 = hp.f64_or("l2", 1e-4);
    let max_iter = hp.usize_or("max_iter", 10_000);
    let tol = hp.f64_or("tolerance", 1e-6);
    let p = x.ncols();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut iterations = Vec::new();
    for y in one_vs_rest(labels, *n_classes) {
        let (params, iters) = minimise_logistic(x, &y, l2, max_iter, tol);
        weights.push(params[..p].to_vec());
        biases.push(params[p]);
        iterations.push(iters);
    }
    Ok(LinearClassifier { n_classes: *n_classes, weights, biases, iterations })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
