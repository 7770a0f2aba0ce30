//! Feature scalers.

use super::PreprocessError;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Maximum number of reference quantiles kept by the quantile scaler.
pub const MAX_REFERENCE_QUANTILES: usize = 1000;
const LAMBDA_BOUNDS: (f64, f64) = (-5.0, 5.0);
const LAMBDA_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMethod {
    UnitNorm,
    Robust,
    Standard,
    Power,
    Quantile,
}

/// Fitted statistics for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureScale {
    /// Constant or deliberately untouched feature.
    Identity,
    Standard { mean: f64, std: f64 },
    Robust { median: f64, iqr: f64 },
    /// Yeo-Johnson with `lambda`, followed by standardisation.
    Power { lambda: f64, mean: f64, std: f64 },
    Quantile { references: Vec<f64> },
    /// Participates in the row norm (unit normalisation only).
    UnitNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub method: ScaleMethod,
    pub features: Vec<FeatureScale>,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Indices of features passed through unchanged.
    pub fn identity_features(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, FeatureScale::Identity))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fits a scaler on every feature.
pub fn fit_scaler(x: ArrayView2<'_, f64>, method: ScaleMethod) -> Result<ScalerParams, PreprocessError> {
    let mask = vec![true; x.ncols()];
    fit_scaler_masked(x, method, &mask)
}

/// Fits a scaler on the features where `mask` is true; the others are identity.
pub fn fit_scaler_masked(
    x: ArrayView2<'_, f64>,
    method: ScaleMethod,
    mask: &[bool],
) -> Result<ScalerParams, PreprocessError> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(PreprocessError::EmptyMatrix);
    }
    if mask.len() != x.ncols() {
        return Err(PreprocessError::DimensionMismatch { expected: x.ncols(), found: mask.len() });
    }
    let features = (0..x.ncols())
        .map(|j| {
            if !mask[j] {
                return FeatureScale::Identity;
            }
            let col: Vec<f64> = x.column(j).to_vec();
            fit_feature(&col, method)
        })
        .collect();
    Ok(ScalerParams { method, features })
}

fn fit_feature(col: &[f64], method: ScaleMethod) -> FeatureScale {
    if method == ScaleMethod::UnitNorm {
        return FeatureScale::UnitNorm;
    }
    let (mean, std) = mean_std(col);
    if !(std > 0.0) {
        return FeatureScale::Identity;
    }
    match method {
        ScaleMethod::Standard => FeatureScale::Standard { mean, std },
        ScaleMethod::Robust => {
            let mut sorted = col.to_vec();
            sorted.sort_by(f64::total_cmp);
            let median = quantile_sorted(&sorted, 0.5);
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            if iqr > 0.0 {
                FeatureScale::Robust { median, iqr }
            } else {
                FeatureScale::Identity
            }
        }
        ScaleMethod::Power => {
            let lambda = fit_yeo_johnson_lambda(col);
            let transformed: Vec<f64> = col.iter().map(|&v| yeo_johnson(v, lambda)).collect();
            let (mean, std) = mean_std(&transformed);
            if std > 0.0 {
                FeatureScale::Power { lambda, mean, std }
            } else {
                FeatureScale::Identity
            }
        }
        ScaleMethod::Quantile => {
            let mut sorted = col.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n_q = sorted.len().min(MAX_REFERENCE_QUANTILES);
            let references = (0..n_q)
                .map(|i| quantile_sorted(&sorted, i as f64 / (n_q - 1).max(1) as f64))
                .collect();
            FeatureScale::Quantile { references }
        }
        ScaleMethod::UnitNorm => unreachable!(),
    }
}

/// Applies fitted parameters.
pub fn transform(x: ArrayView2<'_, f64>, params: &ScalerParams) -> Result<Array2<f64>, PreprocessError> {
    if x.ncols() != params.n_features() {
        return Err(PreprocessError::DimensionMismatch { expected: params.n_features(), found: x.ncols() });
    }
    let mut out = x.to_owned();
    if params.method == ScaleMethod::UnitNorm {
        let active: Vec<usize> = (0..x.ncols())
            .filter(|&j| matches!(params.features[j], FeatureScale::UnitNorm))
            .collect();
        for mut row in out.rows_mut() {
            let norm = active.iter().map(|&j| row[j] * row[j]).sum::<f64>().sqrt();
            if norm > 0.0 {
                for &j in &active {
                    row[j] /= norm;
                }
            }
        }
        return Ok(out);
    }
    for (j, feature) in params.features.iter().enumerate() {
        let mut col = out.column_mut(j);
        match feature {
            FeatureScale::Identity | FeatureScale::UnitNorm => {}
            FeatureScale::Standard { mean, std } => col.mapv_inplace(|v| (v - mean) / std),
            FeatureScale::Robust { median, iqr } => col.mapv_inplace(|v| (v - median) / iqr),
            FeatureScale::Power { lambda, mean, std } => {
                col.mapv_inplace(|v| (yeo_johnson(v, *lambda) - mean) / std)
            }
            FeatureScale::Quantile { references } => col.mapv_inplace(|v| empirical_cdf(references, v)),
        }
    }
    Ok(out)
}

pub fn fit_transform(x: ArrayView2<'_, f64>, method: ScaleMethod) -> Result<(Array2<f64>, ScalerParams), PreprocessError> {
    let params = fit_scaler(x, method)?;
    Ok((transform(x, &params)?, params))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Position of `v` on [0, 1] by interpolating between reference quantiles.
/// Values tied with a run of references map to the middle of that run.
fn empirical_cdf(references: &[f64], v: f64) -> f64 {
    let n = references.len();
    if n < 2 {
        return 0.0;
    }
    let last = (n - 1) as f64;
    if v < references[0] {
        return 0.0;
    }
    if v > references[n - 1] {
        return 1.0;
    }
    let first_ge = references.partition_point(|&r| r < v);
    let first_gt = references.partition_point(|&r| r <= v);
    if first_gt > first_ge {
        // v equals references[first_ge..first_gt]
        let mid = (first_ge + first_gt - 1) as f64 / 2.0;
        return mid / last;
    }
    let hi = first_ge;
    let lo = hi - 1;
    let frac = (v - references[lo]) / (references[hi] - references[lo]);
    (lo as f64 + frac) / last
}

/// Yeo-Johnson power transform.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if x >= 0.0 {
        if lambda.abs() < EPS {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < EPS {
        -(-x).ln_1p()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Gaussian profile log-likelihood of the Yeo-Johnson transformed data.
pub fn yeo_johnson_log_likelihood(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let transformed: Vec<f64> = values.iter().map(|&v| yeo_johnson(v, lambda)).collect();
    let (_, std) = mean_std(&transformed);
    let var = (std * std).max(f64::MIN_POSITIVE);
    let jacobian: f64 = values.iter().map(|&v| v.signum() * v.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Golden-section search for the maximum-likelihood lambda on [-5, 5].
pub fn fit_yeo_johnson_lambda(values: &[f64]) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = LAMBDA_BOUNDS;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = yeo_johnson_log_likelihood(values, c);
    let mut fd = yeo_johnson_log_likelihood(values, d);
    while (b - a).abs() > LAMBDA_TOLERANCE {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = yeo_johnson_log_likelihood(values, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = yeo_johnson_log_likelihood(values, d);
        }
    }
    (a + b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standard_fit_and_transform() {
        let x = array![[1.0], [2.0], [3.0]];
        let (t, p) = fit_transform(x.view(), ScaleMethod::Standard).unwrap();
        match p.features[0] {
            FeatureScale::Standard { mean, std } => {
                assert_eq!(mean, 2.0);
                assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
            }
            ref other => panic!("{other:?}"),
        }
        let want = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in t.column(0).iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn robust_uses_type7_quartiles() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0]];
        let p = fit_scaler(x.view(), ScaleMethod::Robust).unwrap();
        assert_eq!(p.features[0], FeatureScale::Robust { median: 3.0, iqr: 2.0 });
    }

    #[test]
    fn constant_feature_is_identity() {
        let x = array![[5.0], [5.0], [5.0]];
        for m in [ScaleMethod::Standard, ScaleMethod::Robust, ScaleMethod::Power, ScaleMethod::Quantile] {
            let (t, p) = fit_transform(x.view(), m).unwrap();
            assert_eq!(p.features[0], FeatureScale::Identity);
            assert_eq!(t, x);
        }
    }

    #[test]
    fn unit_norm_rows() {
        let x = array![[3.0, 4.0], [0.0, 0.0]];
        let (t, _) = fit_transform(x.view(), ScaleMethod::UnitNorm).unwrap();
        assert_eq!(t, array![[0.6, 0.8], [0.0, 0.0]]);
    }

    #[test]
    fn quantile_on_fit_data() {
        let x = array![[10.0], [20.0], [30.0], [40.0]];
        let (t, _) = fit_transform(x.view(), ScaleMethod::Quantile).unwrap();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in t.column(0).iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = fit_scaler(x.view(), ScaleMethod::Quantile).unwrap();
        let out = transform(array![[5.0], [15.0], [50.0]].view(), &p).unwrap();
        assert_eq!(out.column(0).to_vec(), vec![0.0, 0.5 / 3.0, 1.0]);
    }

    #[test]
    fn yeo_johnson_lambda_one_is_identity() {
        for v in [-3.5, -1.0, -0.1, 0.0, 0.2, 1.0, 7.25] {
            assert!((yeo_johnson(v, 1.0) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn power_standardizes_fit_data() {
        let x = array![[0.1], [0.5], [1.0], [3.0], [10.0], [30.0]];
        let (t, p) = fit_transform(x.view(), ScaleMethod::Power).unwrap();
        let (m, s) = mean_std(&t.column(0).to_vec());
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
        match p.features[0] {
            FeatureScale::Power { lambda, .. } => assert!(lambda < 1.0, "right skew pulls lambda down: {lambda}"),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = fit_scaler(array![[1.0, 2.0], [2.0, 3.0]].view(), ScaleMethod::Standard).unwrap();
        assert!(matches!(
            transform(array![[1.0]].view(), &p),
            Err(PreprocessError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_matrix() {
        let x = Array2::<f64>::zeros((0, 2));
        assert!(matches!(fit_scaler(x.view(), ScaleMethod::Standard), Err(PreprocessError::EmptyMatrix)));
    }
}
