use super::{check_instance, ExplainError, ScalarModel};
use crate::linalg::solve_spd_with_jitter;
use crate::seed;
use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLES: usize = 1000;
pub const RIDGE: f64 = 1e-3;
/// Kernel width per square root of the feature count.
pub const WIDTH_FACTOR: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimeOptions {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for LimeOptions {
    fn default() -> Self {
        Self { n_samples: DEFAULT_SAMPLES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub instance: Vec<f64>,
    /// Surrogate slopes in the original feature units.
    pub attributions: Vec<f64>,
    pub intercept: f64,
    /// Weighted R² of the surrogate; `None` when the model output is constant.
    pub fidelity: Option<f64>,
    pub degenerate: bool,
    pub n_samples: usize,
    pub kernel_width: f64,
    pub seed: u64,
}

/// Fits a weighted ridge surrogate to model outputs on Gaussian
/// perturbations of `instance`. Noise and distances are scaled per feature
/// by the standard deviation of `training` (features with zero spread stay
/// fixed).
pub fn lime_explain(
    model: &dyn ScalarModel,
    instance: &[f64],
    training: ArrayView2<'_, f64>,
    options: LimeOptions,
) -> Result<LimeExplanation, ExplainError> {
    check_instance(instance, &training)?;
    let p = instance.len();
    if options.n_samples < p + 2 {
        return Err(ExplainError::TooFewSamples { needed: p + 2, found: options.n_samples });
    }
    let stds: Vec<f64> = (0..p)
        .map(|j| {
            let col = training.column(j);
            let mean = col.sum() / col.len() as f64;
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
        })
        .collect();
    let width = WIDTH_FACTOR * (p as f64).sqrt();
    let mut rng = seed::rng(options.seed);
    let n = options.n_samples;
    let mut z = Array2::zeros((n, p));
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut d2 = 0.0;
        for j in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            // the first sample is the instance itself
            let e = if i == 0 { 0.0 } else { e };
            z[[i, j]] = instance[j] + e * stds[j];
            if stds[j] > 0.0 {
                d2 += e * e;
            }
        }
        weights[i] = (-d2 / (width * width)).exp();
    }
    let y = model.output(z.view());

    let wsum: f64 = weights.iter().sum();
    let y_mean = weights.iter().zip(&y).map(|(w, v)| w * v).sum::<f64>() / wsum;
    let ss_tot: f64 = weights.iter().zip(&y).map(|(w, v)| w * (v - y_mean).powi(2)).sum();
    let spread = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - y.iter().copied().fold(f64::INFINITY, f64::min);
    if spread == 0.0 {
        return Ok(LimeExplanation {
            instance: instance.to_vec(),
            attributions: vec![0.0; p],
            intercept: y[0],
            fidelity: None,
            degenerate: true,
            n_samples: n,
            kernel_width: width,
            seed: options.seed,
        });
    }

    // weighted ridge on columns centred at their weighted means; the
    // intercept is left unpenalised
    let means: Vec<f64> = (0..p).map(|j| (0..n).map(|i| weights[i] * z[[i, j]]).sum::<f64>() / wsum).collect();
    let mut ata = Array2::<f64>::zeros((p, p));
    let mut atb = vec![0.0; p];
    for i in 0..n {
        let w = weights[i];
        let dy = y[i] - y_mean;
        for a in 0..p {
            let da = z[[i, a]] - means[a];
            atb[a] += w * da * dy;
            for b in 0..=a {
                ata[[a, b]] += w * da * (z[[i, b]] - means[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            ata[[b, a]] = ata[[a, b]];
        }
        ata[[a, a]] += RIDGE;
    }
    let coef = solve_spd_with_jitter(&ata, &atb, 1e-12);
    let intercept = y_mean - coef.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
    let ss_res: f64 = (0..n)
        .map(|i| {
            let pred = intercept + (0..p).map(|j| coef[j] * z[[i, j]]).sum::<f64>();
            weights[i] * (y[i] - pred).powi(2)
        })
        .sum();
    let fidelity = if ss_tot > 0.0 { Some(1.0 - ss_res / ss_tot) } else { None };
    Ok(LimeExplanation {
        instance: instance.to_vec(),
        attributions: coef,
        intercept,
        fidelity,
        degenerate: false,
        n_samples: n,
        kernel_width: width,
        seed: options.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn training() -> Array2<f64> {
        array![[0.0, 1.0], [1.0, -1.0], [2.0, 0.5], [-1.0, 2.0], [0.5, 0.0]]
    }

    #[test]
    fn linear_model_recovered() {
        let f = |x: ArrayView2<'_, f64>| x.rows().into_iter().map(|r| 3.0 * r[0] - 2.0 * r[1]).collect::<Vec<_>>();
        let e = lime_explain(&f, &[0.5, 0.5], training().view(), LimeOptions { n_samples: 5000, seed: 1 }).unwrap();
        let (a, b) = (e.attributions[0], e.attributions[1]);
        let cos = (3.0 * a - 2.0 * b) / ((a * a + b * b).sqrt() * 13f64.sqrt());
        assert!(cos >= 0.99, "cosine {cos}");
        assert!(e.fidelity.unwrap() > 0.99);
    }

    #[test]
    fn constant_model_degenerate() {
        let f = |x: ArrayView2<'_, f64>| vec![0.7; x.nrows()];
        let e = lime_explain(&f, &[0.0, 0.0], training().view(), LimeOptions::default()).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.attributions, vec![0.0, 0.0]);
    }

    #[test]
    fn seeded() {
        let f = |x: ArrayView2<'_, f64>| x.rows().into_iter().map(|r| (r[0] * r[1]).sin()).collect::<Vec<_>>();
        let o = LimeOptions { n_samples: 300, seed: 9 };
        let a = lime_explain(&f, &[0.2, 0.3], training().view(), o).unwrap();
        let b = lime_explain(&f, &[0.2, 0.3], training().view(), o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples() {
        let f = |x: ArrayView2<'_, f64>| vec![0.0; x.nrows()];
        let r = lime_explain(&f, &[0.0, 0.0], training().view(), LimeOptions { n_samples: 3, seed: 0 });
        assert!(matches!(r, Err(ExplainError::TooFewSamples { needed: 4, found: 3 })));
    }
}
