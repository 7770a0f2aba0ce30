//! Evaluation metrics for held-out data.

use crate::models::{FittedModel, ModelError, Target};
use crate::preprocess::FittedPrep;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// Macro averages over classes; 0/0 counts as 0.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Binary tasks only; `None` when the test set holds one class.
    pub auc: Option<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringMetrics {
    pub silhouette: Option<f64>,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    Classification(ClassificationMetrics),
    Regression(RegressionMetrics),
    Clustering(ClusteringMetrics),
}

impl Metrics {
    /// Selection key: accuracy, R² or silhouette (higher is better).
    pub fn primary(&self) -> f64 {
        match self {
            Metrics::Classification(m) => m.accuracy,
            Metrics::Regression(m) => m.r2,
            Metrics::Clustering(m) => m.silhouette.unwrap_or(f64::NEG_INFINITY),
        }
    }
}

pub fn classification_metrics(
    y_true: &[usize],
    y_pred: &[usize],
    positive_scores: Option<&[f64]>,
    n_classes: usize,
) -> ClassificationMetrics {
    assert_eq!(y_true.len(), y_pred.len(), "prediction count");
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[t][p] += 1;
    }
    let n = y_true.len();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        precision += p;
        recall += r;
        f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = n_classes.max(1) as f64;
    let auc = match positive_scores {
        Some(s) if n_classes == 2 => {
            let labels: Vec<bool> = y_true.iter().map(|&t| t == 1).collect();
            roc_auc(&labels, s)
        }
        _ => None,
    };
    ClassificationMetrics {
        accuracy: ratio(correct, n),
        precision: precision / k,
        recall: recall / k,
        f1: f1 / k,
        auc,
        confusion,
    }
}

/// Mann-Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counting one half. `None` without both classes.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    assert_eq!(labels.len(), scores.len(), "score count");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the positive rank sum, with tied groups sharing their mean rank
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_rank = (i + 1 + j + 1) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&r| labels[r]).count() as u64;
        twice_rank_sum += twice_rank * pos_in_group;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - (n_pos * (n_pos + 1)) as u64;
    Some(twice_u as f64 * 0.5 / (n_pos as f64 * n_neg as f64))
}

/// ROC points `(fpr, tpr)` from (0,0) to (1,1), one per distinct threshold.
pub fn roc_points(labels: &[bool], scores: &[f64]) -> Vec<(f64, f64)> {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((if n_neg > 0.0 { fp / n_neg } else { 0.0 }, if n_pos > 0.0 { tp / n_pos } else { 0.0 }));
    }
    points
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> RegressionMetrics {
    assert_eq!(y_true.len(), y_pred.len(), "prediction count");
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let mse = ss_res / n;
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    RegressionMetrics { mse, rmse: mse.sqrt(), mae, r2 }
}

/// Predicts `x` (raw encoded features) through `prep` and scores against `target`.
pub fn evaluate(
    model: &FittedModel,
    prep: Option<&FittedPrep>,
    x: ArrayView2<'_, f64>,
    target: &Target,
) -> Result<Metrics, ModelError> {
    if x.nrows() != target.len() {
        return Err(ModelError::RowMismatch { rows: x.nrows(), targets: target.len() });
    }
    let z = match prep {
        Some(p) => p
            .transform(x)
            .map_err(|_| ModelError::DimensionMismatch { expected: model.n_features(), found: x.ncols() })?,
        None => x.to_owned(),
    };
    match target {
        Target::Classes { labels, n_classes } => {
            let proba = model.predict_proba(z.view())?;
            let pred: Vec<usize> = proba.rows().into_iter().map(|r| crate::models::argmax(&r.to_vec())).collect();
            let scores = (*n_classes == 2).then(|| proba.column(1).to_vec());
            Ok(Metrics::Classification(classification_metrics(labels, &pred, scores.as_deref(), *n_classes)))
        }
        Target::Values(y) => Ok(Metrics::Regression(regression_metrics(y, &model.predict(z.view())?))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = classification_metrics(&[0, 1, 1, 2], &[0, 1, 1, 2], None, 3);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_tied_scores() {
        assert_eq!(roc_auc(&[true, false, true, false], &[0.5; 4]), Some(0.5));
    }

    #[test]
    fn single_class_auc_undefined() {
        let m = classification_metrics(&[1, 1], &[1, 0], Some(&[0.9, 0.2]), 2);
        assert_eq!(m.auc, None);
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn zero_over_zero_precision() {
        // class 1 never predicted
        let m = classification_metrics(&[0, 1], &[0, 0], None, 2);
        assert_eq!(m.precision, 0.25);
        assert_eq!(m.recall, 0.5);
    }

    #[test]
    fn exact_regression() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!((m.mse, m.r2), (0.0, 1.0));
    }

    #[test]
    fn regression_values() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]);
        assert!((m.mse - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.r2, 0.0);
    }

    #[test]
    fn roc_perfect() {
        let pts = roc_points(&[false, false, true, true], &[0.1, 0.2, 0.8, 0.9]);
        assert!(pts.contains(&(0.0, 1.0)));
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
    }
}
