//! Gradient-boosted regression trees.
//!
//! Squared loss for regression, log-loss (softmax for more than two classes)
//! for classification. Leaves carry Newton step values. A stage whose full
//! step would raise the training loss is shrunk by halving until it does not,
//! so the recorded training loss never increases.

use super::tree::{grow, Criterion, Node, Tree, TreeParams, TreeTarget};
use super::{require_two_classes, sigmoid, softmax_rows, Hyperparams, ModelError, Target};
use crate::seed;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

const MAX_HALVINGS: usize = 40;
const HESSIAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// One tree per raw score (one, or one per class for softmax).
    pub trees: Vec<Tree>,
    /// Multiplier on `learning_rate`; below 1 only when the safeguard fired.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingModel {
    pub n_classes: Option<usize>,
    pub init: Vec<f64>,
    pub learning_rate: f64,
    pub stages: Vec<Stage>,
    /// Mean training loss before the first stage and after each stage.
    pub train_loss: Vec<f64>,
}

impl BoostingModel {
    fn raw(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for s in &self.stages {
            let step = self.learning_rate * s.scale;
            for (k, t) in s.trees.iter().enumerate() {
                f[k] += step * t.leaf_value(row)[0];
            }
        }
        f
    }

    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let raws: Vec<Vec<f64>> = x.rows().into_iter().map(|r| self.raw(&r.to_vec())).collect();
        to_output(&raws, self.n_classes)
    }
}

fn to_output(raws: &[Vec<f64>], n_classes: Option<usize>) -> Array2<f64> {
    match n_classes {
        None => Array2::from_shape_fn((raws.len(), 1), |(i, _)| raws[i][0]),
        Some(2) => Array2::from_shape_fn((raws.len(), 2), |(i, k)| {
            let p = sigmoid(raws[i][0]);
            if k == 1 { p } else { 1.0 - p }
        }),
        Some(k) => {
            let mut out = Array2::from_shape_fn((raws.len(), k), |(i, c)| raws[i][c]);
            softmax_rows(&mut out);
            out
        }
    }
}

enum Loss<'a> {
    Squared(&'a [f64]),
    Binary(&'a [usize]),
    Softmax(&'a [usize], usize),
}

impl Loss<'_> {
    fn mean(&self, f: &[Vec<f64>]) -> f64 {
        let n = f.len() as f64;
        let total: f64 = match self {
            Loss::Squared(y) => f.iter().zip(*y).map(|(fi, yi)| (yi - fi[0]).powi(2)).sum(),
            Loss::Binary(y) => f
                .iter()
                .zip(*y)
                .map(|(fi, &yi)| {
                    let z = fi[0];
                    z.max(0.0) + (-z.abs()).exp().ln_1p() - if yi == 1 { z } else { 0.0 }
                })
                .sum(),
            Loss::Softmax(y, _) => f
                .iter()
                .zip(*y)
                .map(|(fi, &yi)| {
                    let m = fi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + fi.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                    lse - fi[yi]
                })
                .sum(),
        };
        total / n
    }

    /// Negative gradient and hessian of each raw score, per output column.
    fn derivatives(&self, f: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            Loss::Squared(y) => (f.iter().zip(*y).map(|(fi, yi)| yi - fi[0]).collect(), vec![1.0; f.len()]),
            Loss::Binary(y) => f
                .iter()
                .zip(*y)
                .map(|(fi, &yi)| {
                    let p = sigmoid(fi[0]);
                    (yi as f64 - p, p * (1.0 - p))
                })
                .unzip(),
            Loss::Softmax(y, n_classes) => {
                let scale = (*n_classes as f64 - 1.0) / *n_classes as f64;
                f.iter()
                    .zip(*y)
                    .map(|(fi, &yi)| {
                        let m = fi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let z: f64 = fi.iter().map(|v| (v - m).exp()).sum();
                        let p = (fi[k] - m).exp() / z;
                        let target = if yi == k { 1.0 } else { 0.0 };
                        (target - p, p * (1.0 - p) / scale)
                    })
                    .unzip()
            }
        }
    }
}

pub(crate) fn fit_boosting(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams) -> Result<BoostingModel, ModelError> {
    let n = x.nrows();
    if n < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: n });
    }
    let n_stages = hp.usize_or("n_stages", 100);
    let learning_rate = hp.f64_or("learning_rate", 0.1);
    let params = TreeParams { max_depth: hp.usize_or("max_depth", 3), min_samples_split: 2, max_features: None };

    let (loss, init) = match target {
        Target::Values(y) => (Loss::Squared(y), vec![y.iter().sum::<f64>() / n as f64]),
        Target::Classes { labels, n_classes } => {
            require_two_classes(labels)?;
            let mut counts = vec![0.0; *n_classes];
            for &c in labels {
                counts[c] += 1.0;
            }
            let prior = |c: f64| (c / n as f64).clamp(1e-6, 1.0 - 1e-6);
            if *n_classes == 2 {
                let p = prior(counts[1]);
                (Loss::Binary(labels), vec![(p / (1.0 - p)).ln()])
            } else {
                (Loss::Softmax(labels, *n_classes), counts.iter().map(|&c| prior(c).ln()).collect())
            }
        }
    };
    let width = init.len();
    let rows: Vec<usize> = (0..n).collect();
    let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
    let mut current = loss.mean(&f);
    let mut train_loss = vec![current];
    let mut stages = Vec::with_capacity(n_stages);
    // Trees use every feature, so the generator is never consulted.
    let mut rng = seed::rng(0);

    for _ in 0..n_stages {
        let mut trees = Vec::with_capacity(width);
        let mut deltas = vec![vec![0.0; width]; n];
        for k in 0..width {
            let (g, h) = loss.derivatives(&f, k);
            let mut tree = grow(x, &rows, TreeTarget::Values(&g), Criterion::Variance, &params, &mut rng);
            newton_leaves(&mut tree, x, &g, &h);
            for (i, row) in x.rows().into_iter().enumerate() {
                deltas[i][k] = tree.leaf_value(row.as_slice().expect("contiguous"))[0];
            }
            trees.push(tree);
        }
        let mut scale = 1.0;
        let mut candidate_loss = f64::INFINITY;
        for _ in 0..=MAX_HALVINGS {
            let cand = apply(&f, &deltas, learning_rate * scale);
            candidate_loss = loss.mean(&cand);
            if candidate_loss <= current {
                break;
            }
            scale *= 0.5;
        }
        if candidate_loss > current {
            scale = 0.0;
            candidate_loss = current;
        }
        f = apply(&f, &deltas, learning_rate * scale);
        current = candidate_loss;
        train_loss.push(current);
        stages.push(Stage { trees, scale });
    }
    Ok(BoostingModel { n_classes: target.n_classes(), init, learning_rate, stages, train_loss })
}

fn apply(f: &[Vec<f64>], deltas: &[Vec<f64>], step: f64) -> Vec<Vec<f64>> {
    f.iter()
        .zip(deltas)
        .map(|(fi, di)| fi.iter().zip(di).map(|(a, b)| a + step * b).collect())
        .collect()
}

/// Replaces each leaf's mean gradient by the Newton step `Σg / Σh`.
fn newton_leaves(tree: &mut Tree, x: ArrayView2<'_, f64>, g: &[f64], h: &[f64]) {
    let mut sums = vec![(0.0, 0.0); tree.nodes.len()];
    for (i, row) in x.rows().into_iter().enumerate() {
        let leaf = tree.leaf_index(row.as_slice().expect("contiguous"));
        sums[leaf].0 += g[i];
        sums[leaf].1 += h[i];
    }
    for (idx, (sg, sh)) in sums.into_iter().enumerate() {
        if matches!(tree.nodes[idx], Node::Leaf { .. }) {
            tree.set_leaf_value(idx, vec![if sh > HESSIAN_FLOOR { sg / sh } else { 0.0 }]);
        }
    }
}
