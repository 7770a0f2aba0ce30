//! Feature scaling and oversampling, and the plan that applies them to a
//! training portion without touching held-out rows.

mod sampler;
mod scaler;

pub use sampler::{class_counts, oversample, SamplerMethod, SamplerSpec};
pub use scaler::{
    fit_scaler, fit_scaler_masked, fit_transform, fit_yeo_johnson_lambda, mean_std, quantile_sorted, transform,
    yeo_johnson, yeo_johnson_log_likelihood, FeatureScale, ScaleMethod, ScalerParams,
};

use crate::dataset::ColumnKind;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("matrix has no rows or no columns")]
    EmptyMatrix,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("oversampling needs at least two classes")]
    SingleClass,
    #[error("class {class} has {size} rows; SMOTE with k={k_neighbors} needs at least k+1")]
    MinorityTooSmall { class: usize, size: usize, k_neighbors: usize },
    #[error("invalid sampler: {0}")]
    InvalidSpec(String),
}

/// Default SMOTE neighbourhood.
pub const DEFAULT_SMOTE_K: usize = 5;
/// Majority/minority ratio above which automatic oversampling kicks in.
pub const AUTO_OVERSAMPLE_RATIO: f64 = 1.5;

/// Scaler selection for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalerChoice {
    /// Standard scaling of continuous features only.
    #[default]
    Auto,
    None,
    Standard,
    Robust,
    UnitNorm,
    Power,
    Quantile,
}

impl ScalerChoice {
    pub fn method(self) -> Option<ScaleMethod> {
        match self {
            ScalerChoice::Auto | ScalerChoice::Standard => Some(ScaleMethod::Standard),
            ScalerChoice::None => None,
            ScalerChoice::Robust => Some(ScaleMethod::Robust),
            ScalerChoice::UnitNorm => Some(ScaleMethod::UnitNorm),
            ScalerChoice::Power => Some(ScaleMethod::Power),
            ScalerChoice::Quantile => Some(ScaleMethod::Quantile),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OversampleChoice {
    /// SMOTE when the class ratio exceeds [`AUTO_OVERSAMPLE_RATIO`].
    #[default]
    Auto,
    None,
    Random,
    Smote,
}

/// Preprocessing recipe, fitted afresh on every training portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparePlan {
    pub scaler: Option<ScaleMethod>,
    /// Features the scaler touches.
    pub scale_mask: Vec<bool>,
    pub oversample: OversampleChoice,
    pub seed: u64,
}

/// What a fitted plan did, kept for transforming new rows and for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPrep {
    pub scaler: Option<ScalerParams>,
    pub sampler: Option<SamplerSpec>,
    pub rows_added: usize,
    pub notes: Vec<String>,
}

impl FittedPrep {
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, PreprocessError> {
        match &self.scaler {
            Some(params) => transform(x, params),
            None => Ok(x.to_owned()),
        }
    }
}

impl PreparePlan {
    /// Builds a plan from user choices. Under `Auto` only continuous features
    /// are scaled; an explicit scaler applies to every feature.
    pub fn new(scaler: ScalerChoice, oversample: OversampleChoice, kinds: &[ColumnKind], seed: u64) -> Self {
        let scale_mask = match scaler {
            ScalerChoice::Auto => kinds.iter().map(|k| *k == ColumnKind::Continuous).collect(),
            _ => vec![true; kinds.len()],
        };
        Self { scaler: scaler.method(), scale_mask, oversample, seed }
    }

    /// Fits on a training portion and returns the transformed (and possibly
    /// oversampled) rows. `y` is `None` for regression and clustering.
    pub fn fit_apply(
        &self,
        x: ArrayView2<'_, f64>,
        y: Option<&[usize]>,
    ) -> Result<(Array2<f64>, Option<Vec<usize>>, FittedPrep), PreprocessError> {
        let mut notes = Vec::new();
        let scaler = match self.scaler {
            Some(method) if self.scale_mask.iter().any(|&m| m) => {
                let params = fit_scaler_masked(x, method, &self.scale_mask)?;
                notes.push(format!(
                    "scaler {method:?} on {} of {} features",
                    self.scale_mask.iter().filter(|&&m| m).count(),
                    self.scale_mask.len()
                ));
                Some(params)
            }
            _ => {
                notes.push("no scaling".to_string());
                None
            }
        };
        let scaled = match &scaler {
            Some(p) => transform(x, p)?,
            None => x.to_owned(),
        };
        let Some(y) = y else {
            return Ok((scaled, None, FittedPrep { scaler, sampler: None, rows_added: 0, notes }));
        };

        let counts = class_counts(y);
        let (min, max) = counts
            .values()
            .fold((usize::MAX, 0usize), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        let imbalanced = counts.len() >= 2 && min < max;
        let method = match self.oversample {
            OversampleChoice::None => None,
            OversampleChoice::Random if imbalanced => Some(SamplerMethod::Random),
            OversampleChoice::Smote if imbalanced => Some(SamplerMethod::Smote),
            OversampleChoice::Auto if imbalanced && max as f64 / min as f64 > AUTO_OVERSAMPLE_RATIO => {
                Some(SamplerMethod::Smote)
            }
            _ => None,
        };
        let sampler = method.map(|m| match m {
            SamplerMethod::Smote if min >= 2 => SamplerSpec::smote(DEFAULT_SMOTE_K.min(min - 1), self.seed),
            SamplerMethod::Smote => {
                notes.push("smallest class has one row; random oversampling used instead of SMOTE".into());
                SamplerSpec::random(self.seed)
            }
            SamplerMethod::Random => SamplerSpec::random(self.seed),
        });
        match sampler {
            Some(spec) => {
                let (ox, oy) = oversample(scaled.view(), y, &spec)?;
                let added = oy.len() - y.len();
                notes.push(format!("{:?} oversampling added {added} rows", spec.method));
                Ok((ox, Some(oy), FittedPrep { scaler, sampler: Some(spec), rows_added: added, notes }))
            }
            None => {
                notes.push("no oversampling".to_string());
                Ok((scaled, Some(y.to_vec()), FittedPrep { scaler, sampler: None, rows_added: 0, notes }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn auto_scales_continuous_only() {
        let kinds = [ColumnKind::Continuous, ColumnKind::Categorical, ColumnKind::Categorical];
        let plan = PreparePlan::new(ScalerChoice::Auto, OversampleChoice::None, &kinds, 0);
        let x = array![[1.0, 1.0, 0.0], [2.0, 0.0, 1.0], [3.0, 1.0, 0.0]];
        let (out, _, _) = plan.fit_apply(x.view(), None).unwrap();
        assert_eq!(out.column(1), x.column(1));
        assert!((out[[0, 0]] + 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn auto_oversampling_threshold() {
        let kinds = [ColumnKind::Continuous];
        let plan = PreparePlan::new(ScalerChoice::None, OversampleChoice::Auto, &kinds, 0);
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0]];
        // 3:2 is within the ratio, untouched
        let (_, y, prep) = plan.fit_apply(x.view(), Some(&[0, 0, 0, 1, 1])).unwrap();
        assert_eq!(y.unwrap().len(), 5);
        assert!(prep.sampler.is_none());
        // 4:1 triggers SMOTE, but one minority row forces random
        let (_, y, prep) = plan.fit_apply(x.view(), Some(&[0, 0, 0, 0, 1])).unwrap();
        assert_eq!(class_counts(&y.unwrap()), std::collections::BTreeMap::from([(0, 4), (1, 4)]));
        assert_eq!(prep.sampler.unwrap().method, SamplerMethod::Random);
    }

    #[test]
    fn smote_k_capped() {
        let plan = PreparePlan::new(ScalerChoice::None, OversampleChoice::Smote, &[ColumnKind::Continuous], 1);
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0], [6.0], [7.0]];
        let (_, _, prep) = plan.fit_apply(x.view(), Some(&[0, 0, 0, 0, 0, 0, 1, 1])).unwrap();
        assert_eq!(prep.sampler.unwrap().k_neighbors, 1);
    }
}
