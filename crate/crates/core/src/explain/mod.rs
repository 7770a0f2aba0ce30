//! Model-agnostic explanations: partial dependence, Shapley values, local
//! linear surrogates and counterfactual search.
//!
//! Explainers only see a model through [`ScalarModel`] (one number per row,
//! e.g. a class probability) or [`ProbabilisticModel`] (class probabilities),
//! so plain closures work as well as fitted models.

mod counterfactual;
mod lime;
mod pdp;
mod shap;

pub use counterfactual::{counterfactual, CounterfactualExplanation, CounterfactualOptions, DEFAULT_GRID_POINTS};
pub use lime::{lime_explain, LimeExplanation, LimeOptions};
pub use pdp::{linspace, pdp, pdp_pair, PdpExplanation, PdpSurface};
pub use shap::{shap_values, ShapExplanation, ShapMode, MAX_EXACT_FEATURES};

use crate::models::FittedModel;
use crate::preprocess::FittedPrep;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// A model reduced to one output per row.
pub trait ScalarModel: Sync {
    fn output(&self, x: ArrayView2<'_, f64>) -> Vec<f64>;
}

impl<F> ScalarModel for F
where
    F: Fn(ArrayView2<'_, f64>) -> Vec<f64> + Sync,
{
    fn output(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self(x)
    }
}

/// A classifier exposing class probabilities.
pub trait ProbabilisticModel: Sync {
    fn proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64>;
}

impl<F> ProbabilisticModel for F
where
    F: Fn(ArrayView2<'_, f64>) -> Array2<f64> + Sync,
{
    fn proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self(x)
    }
}

/// A fitted model together with the preprocessing it was trained behind,
/// so explanations are phrased in the encoded (unscaled) feature space.
#[derive(Debug, Clone, Copy)]
pub struct PreparedModel<'a> {
    pub model: &'a FittedModel,
    pub prep: Option<&'a FittedPrep>,
    /// Class whose probability is the scalar output (classifiers only).
    pub class: usize,
}

impl PreparedModel<'_> {
    fn inputs(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self.prep {
            Some(p) => p.transform(x).expect("explainer rows match the training width"),
            None => x.to_owned(),
        }
    }
}

impl ScalarModel for PreparedModel<'_> {
    fn output(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let z = self.inputs(x);
        if self.model.is_classifier() {
            self.model.predict_proba(z.view()).expect("width checked").column(self.class).to_vec()
        } else {
            self.model.predict(z.view()).expect("width checked")
        }
    }
}

impl ProbabilisticModel for PreparedModel<'_> {
    fn proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let z = self.inputs(x);
        self.model.predict_proba(z.view()).expect("classifier with matching width")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Explanation {
    Pdp(PdpExplanation),
    Shap(ShapExplanation),
    Lime(LimeExplanation),
    Counterfactual(CounterfactualExplanation),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("feature {feature} out of range for {n_features} features")]
    FeatureOutOfRange { feature: usize, n_features: usize },
    #[error("exact Shapley values need at most {max} features, got {found}")]
    TooManyFeaturesForExact { found: usize, max: usize },
    #[error("instance is already predicted as class {0}")]
    AlreadyDesiredClass(usize),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("background data is empty")]
    EmptyBackground,
    #[error("{0}")]
    InvalidArgument(String),
}

pub(crate) fn check_instance(instance: &[f64], background: &ArrayView2<'_, f64>) -> Result<(), ExplainError> {
    if background.nrows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    if instance.len() != background.ncols() {
        return Err(ExplainError::InvalidArgument(format!(
            "instance has {} values, background has {} columns",
            instance.len(),
            background.ncols()
        )));
    }
    Ok(())
}
