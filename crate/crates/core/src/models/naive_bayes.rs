use super::{require_two_classes, softmax_rows, Hyperparams, ModelError, Target};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gaussian naive Bayes. Classes absent from the training rows get a zero
/// prior and never win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        (0..self.priors.len())
            .map(|c| {
                if self.priors[c] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut s = self.priors[c].ln();
                for (j, &v) in row.iter().enumerate() {
                    let var = self.variances[c][j];
                    let d = v - self.means[c][j];
                    s -= 0.5 * ((2.0 * PI * var).ln() + d * d / var);
                }
                s
            })
            .collect()
    }

    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.priors.len()));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (c, v) in self.log_joint(&row.to_vec()).into_iter().enumerate() {
                out[[i, c]] = v;
            }
        }
        softmax_rows(&mut out);
        out
    }
}

pub(crate) fn fit_naive_bayes(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams) -> Result<GaussianNb, ModelError> {
    let Target::Classes { labels, n_classes } = target else {
        return Err(ModelError::DegenerateTarget("naive bayes needs class labels".into()));
    };
    require_two_classes(labels)?;
    let (n, p) = x.dim();
    let k = *n_classes;
    let mut counts = vec![0usize; k];
    let mut means = vec![vec![0.0; p]; k];
    for (row, &c) in x.rows().into_iter().zip(labels) {
        counts[c] += 1;
        for j in 0..p {
            means[c][j] += row[j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for m in &mut means[c] {
                *m /= counts[c] as f64;
            }
        }
    }
    let mut variances = vec![vec![0.0; p]; k];
    for (row, &c) in x.rows().into_iter().zip(labels) {
        for j in 0..p {
            let d = row[j] - means[c][j];
            variances[c][j] += d * d;
        }
    }
    let max_feature_var = (0..p)
        .map(|j| {
            let col = x.column(j);
            let mean = col.sum() / n as f64;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
        })
        .fold(0.0, f64::max);
    let factor = hp.f64_or("var_floor", 1e-9);
    let floor = if max_feature_var > 0.0 { factor * max_feature_var } else { factor };
    for c in 0..k {
        for v in &mut variances[c] {
            *v = if counts[c] > 0 { *v / counts[c] as f64 } else { 1.0 };
            *v = v.max(floor);
        }
    }
    let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(GaussianNb { priors, means, variances })
}
