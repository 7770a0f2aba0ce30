//! Supervised model catalog.
//!
//! Every algorithm is fitted through [`fit`] and produces a [`FittedModel`],
//! a serialisable record of the learned parameters. Classifiers expose class
//! probabilities; [`FittedModel::predict`] is always the row-wise argmax of
//! [`FittedModel::predict_proba`], ties going to the smaller class index.

mod boosting;
mod catalog;
mod forest;
mod knn;
mod linear;
mod naive_bayes;
mod svm;
pub mod tree;

pub use boosting::BoostingModel;
pub use catalog::{catalog, default_max_features, get_models, tuning_grid, Catalog, ParamRange};
pub use forest::ForestModel;
pub use knn::KnnModel;
pub use linear::{logistic_objective, LinearClassifier, LinearRegressionModel};
pub use naive_bayes::GaussianNb;

pub use crate::dataset::Task;
use crate::neural::mlp::MlpModel;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LinearRegression,
    LogisticRegression,
    Svm,
    Knn,
    NaiveBayes,
    RandomForest,
    GradientBoosting,
    Mlp,
}

impl Algorithm {
    /// Catalog order.
    pub const ALL: [Algorithm; 8] = [
        Algorithm::LinearRegression,
        Algorithm::LogisticRegression,
        Algorithm::Svm,
        Algorithm::Knn,
        Algorithm::NaiveBayes,
        Algorithm::RandomForest,
        Algorithm::GradientBoosting,
        Algorithm::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LinearRegression => "linear_regression",
            Algorithm::LogisticRegression => "logistic_regression",
            Algorithm::Svm => "svm",
            Algorithm::Knn => "knn",
            Algorithm::NaiveBayes => "naive_bayes",
            Algorithm::RandomForest => "random_forest",
            Algorithm::GradientBoosting => "gradient_boosting",
            Algorithm::Mlp => "mlp",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        catalog().algorithms.get(self.name()).is_some_and(|a| a.tasks.contains(&task))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ModelError::UnknownAlgorithmName(s.to_string()))
    }
}

/// Named numeric hyperparameters. Integers and flags are stored as floats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparams(pub BTreeMap<String, f64>);

impl Hyperparams {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn f64_or(&self, name: &str, default: f64) -> f64 {
        self.get(name).unwrap_or(default)
    }

    pub fn usize_or(&self, name: &str, default: usize) -> usize {
        self.get(name).map(|v| v.round().max(0.0) as usize).unwrap_or(default)
    }

    pub fn flag_or(&self, name: &str, default: bool) -> bool {
        self.get(name).map(|v| v != 0.0).unwrap_or(default)
    }
}

/// Algorithm choice plus everything needed to fit it reproducibly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub algorithm: Algorithm,
    pub task: Task,
    pub hyperparameters: Hyperparams,
    pub seed: u64,
}

impl ModelSpec {
    /// Spec with catalog defaults for a problem of the given shape.
    pub fn new(algorithm: Algorithm, task: Task, n_rows: usize, n_features: usize, seed: u64) -> Self {
        Self {
            algorithm,
            task,
            hyperparameters: catalog::defaults(algorithm, task, n_rows, n_features),
            seed,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.hyperparameters.set(name, value);
        self
    }

    /// Checks the task and every hyperparameter against the catalog.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.task.is_supervised() || !self.algorithm.supports(self.task) {
            return Err(ModelError::UnsupportedTask { algorithm: self.algorithm, task: self.task });
        }
        catalog::validate_params(self.algorithm, &self.hyperparameters)
    }
}

/// Training labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Classes { labels: Vec<usize>, n_classes: usize },
    Values(Vec<f64>),
}

impl Target {
    pub fn classes(labels: Vec<usize>, n_classes: usize) -> Self {
        Target::Classes { labels, n_classes }
    }

    pub fn len(&self) -> usize {
        match self {
            Target::Classes { labels, .. } => labels.len(),
            Target::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Target::Classes { .. } => Task::Classification,
            Target::Values(_) => Task::Regression,
        }
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Target::Classes { n_classes, .. } => Some(*n_classes),
            Target::Values(_) => None,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match self {
            Target::Classes { labels, .. } => Some(labels),
            Target::Values(_) => None,
        }
    }

    /// Targets as floats (class indices for classification).
    pub fn as_f64(&self) -> Vec<f64> {
        match self {
            Target::Classes { labels, .. } => labels.iter().map(|&c| c as f64).collect(),
            Target::Values(v) => v.clone(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Target {
        match self {
            Target::Classes { labels, n_classes } => {
                Target::Classes { labels: rows.iter().map(|&r| labels[r]).collect(), n_classes: *n_classes }
            }
            Target::Values(v) => Target::Values(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnedParams {
    Linear(LinearRegressionModel),
    Logistic(LinearClassifier),
    Svm(LinearClassifier),
    Knn(KnnModel),
    NaiveBayes(GaussianNb),
    Forest(ForestModel),
    Boosting(BoostingModel),
    Mlp(MlpModel),
}

/// A trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    /// Number of classes for classifiers.
    pub n_classes: Option<usize>,
    pub params: LearnedParams,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("row count mismatch: {rows} rows, {targets} targets")]
    RowMismatch { rows: usize, targets: usize },
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("k={k} exceeds the {n_rows} training rows")]
    KTooLarge { k: usize, n_rows: usize },
    #[error("{algorithm} does not support {task}")]
    UnsupportedTask { algorithm: Algorithm, task: Task },
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithmName(String),
    #[error("hyperparameter {name}={value}: {reason}")]
    InvalidHyperparameter { name: String, value: f64, reason: String },
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("model is not a classifier")]
    NotClassifier,
}

/// Fits `spec` on `x` and `target`.
pub fn fit(
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
    target: &Target,
    feature_names: &[String],
) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    if target.task() != spec.task {
        return Err(ModelError::UnsupportedTask { algorithm: spec.algorithm, task: target.task() });
    }
    if x.nrows() != target.len() {
        return Err(ModelError::RowMismatch { rows: x.nrows(), targets: target.len() });
    }
    if feature_names.len() != x.ncols() {
        return Err(ModelError::DimensionMismatch { expected: x.ncols(), found: feature_names.len() });
    }
    let hp = &spec.hyperparameters;
    let params = match spec.algorithm {
        Algorithm::LinearRegression => LearnedParams::Linear(linear::fit_linear_regression(x, target)?),
        Algorithm::LogisticRegression => LearnedParams::Logistic(linear::fit_logistic(x, target, hp)?),
        Algorithm::Svm => LearnedParams::Svm(svm::fit_svm(x, target, hp, spec.seed)?),
        Algorithm::Knn => LearnedParams::Knn(knn::fit_knn(x, target, hp)?),
        Algorithm::NaiveBayes => LearnedParams::NaiveBayes(naive_bayes::fit_naive_bayes(x, target, hp)?),
        Algorithm::RandomForest => LearnedParams::Forest(forest::fit_forest(x, target, hp, spec.seed)?),
        Algorithm::GradientBoosting => LearnedParams::Boosting(boosting::fit_boosting(x, target, hp)?),
        Algorithm::Mlp => LearnedParams::Mlp(crate::neural::mlp::fit_mlp(x, target, hp, spec.seed)?),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        feature_names: feature_names.to_vec(),
        n_classes: target.n_classes(),
        params,
    })
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_classifier(&self) -> bool {
        self.n_classes.is_some()
    }

    fn check(&self, x: &ArrayView2<'_, f64>) -> Result<(), ModelError> {
        if x.ncols() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), found: x.ncols() });
        }
        Ok(())
    }

    /// Raw outputs: class probabilities (n × classes) or values (n × 1).
    fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.params {
            LearnedParams::Linear(m) => m.scores(x),
            LearnedParams::Logistic(m) | LearnedParams::Svm(m) => m.scores(x),
            LearnedParams::Knn(m) => m.scores(x),
            LearnedParams::NaiveBayes(m) => m.scores(x),
            LearnedParams::Forest(m) => m.scores(x),
            LearnedParams::Boosting(m) => m.scores(x),
            LearnedParams::Mlp(m) => m.scores(x),
        }
    }

    /// Class probabilities, one row per input row summing to 1.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
        self.check(&x)?;
        if !self.is_classifier() {
            return Err(ModelError::NotClassifier);
        }
        Ok(self.scores(x))
    }

    /// Class indices (as floats) for classifiers, values for regressors.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, ModelError> {
        self.check(&x)?;
        let scores = self.scores(x);
        if self.is_classifier() {
            Ok(scores.axis_iter(Axis(0)).map(|row| argmax(row.as_slice().expect("contiguous")) as f64).collect())
        } else {
            Ok(scores.column(0).to_vec())
        }
    }

    /// Predicted class indices; errors for regressors.
    pub fn predict_classes(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>, ModelError> {
        let proba = self.predict_proba(x)?;
        Ok(proba.axis_iter(Axis(0)).map(|row| argmax(row.as_slice().expect("contiguous"))).collect())
    }

    /// Learning curve recorded during fitting, where the algorithm keeps one.
    pub fn loss_trace(&self) -> Option<&[f64]> {
        match &self.params {
            LearnedParams::Boosting(m) => Some(&m.train_loss),
            LearnedParams::Mlp(m) => Some(&m.loss_trace),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Index of the largest entry; ties go to the smaller index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax of each row.
pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Errors unless at least two distinct classes appear in `labels`.
pub(crate) fn require_two_classes(labels: &[usize]) -> Result<(), ModelError> {
    match labels.first() {
        Some(&first) if labels.iter().any(|&c| c != first) => Ok(()),
        _ => Err(ModelError::DegenerateTarget("training labels contain a single class".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("frobnicate".parse::<Algorithm>(), Err(ModelError::UnknownAlgorithmName(_))));
    }

    #[test]
    fn argmax_ties_to_first() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn fit_rejects_wrong_task() {
        let spec = ModelSpec::new(Algorithm::LinearRegression, Task::Regression, 3, 1, 0);
        let x = array![[0.0], [1.0], [2.0]];
        let err = fit(&spec, x.view(), &Target::classes(vec![0, 1, 0], 2), &["x".into()]).unwrap_err();
        assert!(matches!(err, ModelError::UnsupportedTask { .. }));
    }

    #[test]
    fn dimension_checked_on_predict() {
        let spec = ModelSpec::new(Algorithm::LinearRegression, Task::Regression, 3, 1, 0);
        let x = array![[0.0], [1.0], [2.0]];
        let m = fit(&spec, x.view(), &Target::Values(vec![1.0, 3.0, 5.0]), &["x".into()]).unwrap();
        assert!(matches!(m.predict(array![[1.0, 2.0]].view()), Err(ModelError::DimensionMismatch { .. })));
    }
}
