//! Interventional Shapley values: absent features take their values from
//! background rows.

use super::{check_instance, ExplainError, ScalarModel};
use crate::linalg::solve_spd_with_jitter;
use crate::seed;
use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MAX_EXACT_FEATURES: usize = 12;
pub const SAMPLED_COALITIONS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapMode {
    /// Exact when the feature count allows it, sampled otherwise.
    #[default]
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub instance: Vec<f64>,
    pub attributions: Vec<f64>,
    /// Mean model output over the background rows.
    pub baseline: f64,
    /// Model output on the instance.
    pub prediction: f64,
    pub exact: bool,
    pub coalitions: usize,
    pub background_rows: usize,
    pub seed: u64,
}

pub fn shap_values(
    model: &dyn ScalarModel,
    instance: &[f64],
    background: ArrayView2<'_, f64>,
    mode: ShapMode,
    seed: u64,
) -> Result<ShapExplanation, ExplainError> {
    check_instance(instance, &background)?;
    let p = instance.len();
    let exact = match mode {
        ShapMode::Exact if p > MAX_EXACT_FEATURES => {
            return Err(ExplainError::TooManyFeaturesForExact { found: p, max: MAX_EXACT_FEATURES })
        }
        ShapMode::Exact => true,
        ShapMode::Auto => p <= MAX_EXACT_FEATURES,
        ShapMode::Sampled => false,
    };
    let baseline = coalition_values(model, instance, &background, &[vec![false; p]])[0];
    let prediction = model.output(ndarray::ArrayView2::from_shape((1, p), instance).expect("one row"))[0];
    let (attributions, coalitions) = if exact {
        (exact_shapley(model, instance, &background), 1usize << p)
    } else {
        (kernel_shap(model, instance, &background, baseline, prediction, seed), SAMPLED_COALITIONS)
    };
    Ok(ShapExplanation {
        instance: instance.to_vec(),
        attributions,
        baseline,
        prediction,
        exact,
        coalitions,
        background_rows: background.nrows(),
        seed,
    })
}

/// Mean output over the background with the masked features taken from the
/// instance, one value per mask.
fn coalition_values(model: &dyn ScalarModel, instance: &[f64], background: &ArrayView2<'_, f64>, masks: &[Vec<bool>]) -> Vec<f64> {
    let n = background.nrows();
    let p = instance.len();
    let mut out = Vec::with_capacity(masks.len());
    // keep each model call to a bounded batch
    let per_batch = (65_536 / n.max(1)).max(1);
    for chunk in masks.chunks(per_batch) {
        let mut batch = Array2::zeros((chunk.len() * n, p));
        for (m, mask) in chunk.iter().enumerate() {
            for i in 0..n {
                for j in 0..p {
                    batch[[m * n + i, j]] = if mask[j] { instance[j] } else { background[[i, j]] };
                }
            }
        }
        let y = model.output(batch.view());
        for m in 0..chunk.len() {
            out.push(y[m * n..(m + 1) * n].iter().sum::<f64>() / n as f64);
        }
    }
    out
}

fn exact_shapley(model: &dyn ScalarModel, instance: &[f64], background: &ArrayView2<'_, f64>) -> Vec<f64> {
    let p = instance.len();
    let masks: Vec<Vec<bool>> = (0..1usize << p).map(|s| (0..p).map(|j| s >> j & 1 == 1).collect()).collect();
    let v = coalition_values(model, instance, background, &masks);
    let fact: Vec<f64> = (0..=p).scan(1.0, |acc, i| {
        if i > 0 {
            *acc *= i as f64;
        }
        Some(*acc)
    }).collect();
    let mut phi = vec![0.0; p];
    for s in 0..1usize << p {
        let size = s.count_ones() as usize;
        if size == p {
            continue;
        }
        let w = fact[size] * fact[p - size - 1] / fact[p];
        for (j, phi_j) in phi.iter_mut().enumerate() {
            if s >> j & 1 == 0 {
                *phi_j += w * (v[s | 1 << j] - v[s]);
            }
        }
    }
    phi
}

/// Kernel SHAP: coalition sizes drawn from the Shapley kernel, then a least
/// squares fit constrained so the attributions sum to `prediction - baseline`.
fn kernel_shap(
    model: &dyn ScalarModel,
    instance: &[f64],
    background: &ArrayView2<'_, f64>,
    baseline: f64,
    prediction: f64,
    seed: u64,
) -> Vec<f64> {
    let p = instance.len();
    if p == 1 {
        return vec![prediction - baseline];
    }
    let mut rng = seed::rng(seed);
    let size_weights: Vec<f64> = (1..p).map(|s| (p - 1) as f64 / (s * (p - s)) as f64).collect();
    let total: f64 = size_weights.iter().sum();
    let masks: Vec<Vec<bool>> = (0..SAMPLED_COALITIONS)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut size = p - 1;
            for (i, w) in size_weights.iter().enumerate() {
                if u < *w {
                    size = i + 1;
                    break;
                }
                u -= w;
            }
            let mut mask = vec![false; p];
            for j in sample(&mut rng, p, size) {
                mask[j] = true;
            }
            mask
        })
        .collect();
    let v = coalition_values(model, instance, background, &masks);
    // eliminate the last attribution with the efficiency constraint
    let total_effect = prediction - baseline;
    let q = p - 1;
    let mut ata = Array2::<f64>::zeros((q, q));
    let mut atb = vec![0.0; q];
    for (mask, value) in masks.iter().zip(&v) {
        let last = f64::from(u8::from(mask[p - 1]));
        let row: Vec<f64> = (0..q).map(|j| f64::from(u8::from(mask[j])) - last).collect();
        let target = value - baseline - last * total_effect;
        for a in 0..q {
            atb[a] += row[a] * target;
            for b in 0..q {
                ata[[a, b]] += row[a] * row[b];
            }
        }
    }
    let mut phi = solve_spd_with_jitter(&ata, &atb, 1e-10);
    let rest: f64 = phi.iter().sum();
    phi.push(total_effect - rest);
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn linear(x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| 2.0 * r[0] - 1.0 * r[1] + 0.5 * r[2] + 3.0).collect()
    }

    #[test]
    fn linear_closed_form() {
        let bg = array![[0.0, 1.0, 2.0], [2.0, 3.0, -2.0], [1.0, -1.0, 0.0]];
        let x = [3.0, 0.0, 1.0];
        let e = shap_values(&linear, &x, bg.view(), ShapMode::Exact, 0).unwrap();
        let means = [1.0, 1.0, 0.0];
        let w = [2.0, -1.0, 0.5];
        for j in 0..3 {
            assert!((e.attributions[j] - w[j] * (x[j] - means[j])).abs() < 1e-12);
        }
        assert!((e.baseline + e.attributions.iter().sum::<f64>() - e.prediction).abs() < 1e-12);
    }

    #[test]
    fn symmetric_features_share_credit() {
        let bg = array![[0.0, 0.0], [1.0, 1.0]];
        let f = |x: ArrayView2<'_, f64>| x.rows().into_iter().map(|r| r[0] + r[1] + r[0] * r[1]).collect::<Vec<_>>();
        let e = shap_values(&f, &[2.0, 2.0], bg.view(), ShapMode::Exact, 0).unwrap();
        assert!((e.attributions[0] - e.attributions[1]).abs() < 1e-9);
    }

    #[test]
    fn sampled_recovers_linear_model() {
        let bg = array![[0.0, 1.0, 2.0], [2.0, 3.0, -2.0], [1.0, -1.0, 0.0]];
        let x = [3.0, 0.0, 1.0];
        let e = shap_values(&linear, &x, bg.view(), ShapMode::Sampled, 4).unwrap();
        let expected = [4.0, 1.0, 0.5];
        for j in 0..3 {
            assert!((e.attributions[j] - expected[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_limit() {
        let bg = Array2::zeros((1, 13));
        let x = vec![0.0; 13];
        let f = |x: ArrayView2<'_, f64>| vec![0.0; x.nrows()];
        assert!(matches!(shap_values(&f, &x, bg.view(), ShapMode::Exact, 0), Err(ExplainError::TooManyFeaturesForExact { .. })));
    }
}
