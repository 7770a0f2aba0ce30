//! Linear soft-margin SVM trained with the Pegasos stochastic subgradient
//! method. The bias is learned as the weight of a constant feature.

use super::linear::{dot, one_vs_rest, LinearClassifier};
use super::{require_two_classes, Hyperparams, ModelError, Target};
use crate::seed;
use ndarray::ArrayView2;
use rand::Rng;

pub(crate) fn fit_svm(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams, seed: u64) -> Result<LinearClassifier, ModelError> {
    let Target::Classes { labels, n_classes } = target else {
        return Err(ModelError::DegenerateTarget("svm needs class labels".into()));
    };
    require_two_classes(labels)?;
    let lambda = hp.f64_or("lambda", 0.01);
    let epochs = hp.usize_or("epochs", 20);
    let rows: Vec<Vec<f64>> = x
        .rows()
        .into_iter()
        .map(|r| {
            let mut v = r.to_vec();
            v.push(1.0);
            v
        })
        .collect();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut iterations = Vec::new();
    for (k, y) in one_vs_rest(labels, *n_classes).into_iter().enumerate() {
        let signs: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 1.0 } else { -1.0 }).collect();
        let iters = epochs * rows.len();
        let w = pegasos(&rows, &signs, lambda, iters, seed::derive(seed, k as u64));
        let p = w.len() - 1;
        weights.push(w[..p].to_vec());
        biases.push(w[p]);
        iterations.push(iters);
    }
    Ok(LinearClassifier { n_classes: *n_classes, weights, biases, iterations })
}

fn pegasos(rows: &[Vec<f64>], y: &[f64], lambda: f64, iterations: usize, seed: u64) -> Vec<f64> {
    let dim = rows[0].len();
    let mut rng = seed::rng(seed);
    let mut w = vec![0.0; dim];
    let radius = 1.0 / lambda.sqrt();
    for t in 1..=iterations {
        let i = rng.random_range(0..rows.len());
        let eta = 1.0 / (lambda * t as f64);
        let margin = y[i] * dot(&w, &rows[i]);
        let shrink = 1.0 - eta * lambda;
        for v in &mut w {
            *v *= shrink;
        }
        if margin < 1.0 {
            for (v, xi) in w.iter_mut().zip(&rows[i]) {
                *v += eta * y[i] * xi;
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            let s = radius / norm;
            for v in &mut w {
                *v *= s;
            }
        }
    }
    w
}
