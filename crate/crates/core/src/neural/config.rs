//! Run configuration documents.

use super::split::DEFAULT_TEST_FRACTION;
use super::tuning::DEFAULT_FOLDS;
use crate::dataset::{ColumnKind, Schema, Task};
use crate::models::Algorithm;
use crate::preprocess::{OversampleChoice, ScalerChoice};
use crate::unsupervised::ClusterAlgorithm;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub dataset_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Feature columns; empty means every non-target column.
    #[serde(default)]
    pub inputs: Vec<String>,
    /// Catalog subset by name; `None` means every model for the task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<String>>,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notify: Option<NotifyConfig>,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessingConfig {
    #[serde(default)]
    pub scaler: ScalerChoice,
    #[serde(default)]
    pub oversample: OversampleChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Run seed; every random choice in the run derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: DEFAULT_TEST_FRACTION, seed: 0, stratified: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self { enabled: true, folds: DEFAULT_FOLDS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    #[serde(default = "default_cluster_algorithm")]
    pub algorithm: ClusterAlgorithm,
    /// Cluster count; chosen by silhouette over 2..=5 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { algorithm: ClusterAlgorithm::Kmeans, k: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotifyMode {
    File,
    Webhook,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotifyConfig {
    pub mode: NotifyMode,
    /// Outbox directory (file) or URL (webhook).
    #[serde(default)]
    pub address: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Include wall-clock fit times, which makes reports non-reproducible.
    #[serde(default)]
    pub timings: bool,
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_cluster_algorithm() -> ClusterAlgorithm {
    ClusterAlgorithm::Kmeans
}

fn yes() -> bool {
    true
}

/// A configuration problem tied to the offending field path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            // missing fields are reported against the parent path
            let field = match message.strip_prefix("missing field `") {
                Some(rest) => {
                    let name = rest.split('`').next().unwrap_or_default();
                    if path == "." { name.to_string() } else { format!("{path}.{name}") }
                }
                None if path == "." => "$".to_string(),
                None => path,
            };
            ConfigError::new(field, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// Checks the configuration on its own.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset_id.trim().is_empty() {
            return Err(ConfigError::new("dataset_id", "must not be empty"));
        }
        if self.task.is_supervised() && self.target.as_deref().is_none_or(|t| t.trim().is_empty()) {
            return Err(ConfigError::new("target", format!("required for {} tasks", self.task)));
        }
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(ConfigError::new("split.test_fraction", "must lie strictly between 0 and 1"));
        }
        if self.tuning.folds < 2 {
            return Err(ConfigError::new("tuning.folds", "must be at least 2"));
        }
        if let Some(models) = &self.models {
            if !self.task.is_supervised() {
                return Err(ConfigError::new("models", "only supervised tasks select models"));
            }
            if models.is_empty() {
                return Err(ConfigError::new("models", "must not be empty when given"));
            }
            for (i, name) in models.iter().enumerate() {
                let alg: Algorithm =
                    name.parse().map_err(|_| ConfigError::new(format!("models[{i}]"), format!("unknown model {name:?}")))?;
                if !alg.supports(self.task) {
                    return Err(ConfigError::new(format!("models[{i}]"), format!("{alg} does not support {}", self.task)));
                }
            }
        }
        if let Some(c) = &self.clustering {
            if self.task.is_supervised() {
                return Err(ConfigError::new("clustering", "only applies to unsupervised tasks"));
            }
            if c.k.is_some_and(|k| k < 1) {
                return Err(ConfigError::new("clustering.k", "must be at least 1"));
            }
        }
        if let Some(n) = &self.notify {
            if n.address.trim().is_empty() {
                return Err(ConfigError::new("notify.address", "must not be empty"));
            }
            if n.mode == NotifyMode::Webhook && !(n.address.starts_with("http://") || n.address.starts_with("https://")) {
                return Err(ConfigError::new("notify.address", "webhook address must be an http(s) URL"));
            }
        }
        Ok(())
    }

    /// Checks column references against a dataset schema.
    pub fn validate_against(&self, schema: &Schema) -> Result<(), ConfigError> {
        if let Some(target) = &self.target {
            match schema.get(target.trim()) {
                None => return Err(ConfigError::new("target", format!("no column named {target:?}"))),
                Some(col) if self.task == Task::Regression && col.kind != ColumnKind::Continuous => {
                    return Err(ConfigError::new("target", format!("regression needs a continuous column, {target:?} is {}", col.kind)))
                }
                Some(_) => {}
            }
        }
        for (i, name) in self.inputs.iter().enumerate() {
            if schema.get(name.trim()).is_none() {
                return Err(ConfigError::new(format!("inputs[{i}]"), format!("no column named {name:?}")));
            }
            if self.target.as_deref().map(str::trim) == Some(name.trim()) {
                return Err(ConfigError::new(format!("inputs[{i}]"), "target cannot also be an input"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(r#"{"task":"classification","dataset_id":"d1","target":"y"}"#).unwrap();
        assert_eq!(c.split.test_fraction, 0.25);
        assert_eq!(c.tuning.folds, 5);
        assert!(c.tuning.enabled);
        assert!(c.inputs.is_empty());
    }

    #[test]
    fn missing_target_names_field() {
        let e = RunConfig::from_json(r#"{"task":"classification","dataset_id":"d1"}"#).unwrap_err();
        assert_eq!(e.field, "target");
    }

    #[test]
    fn missing_task_names_field() {
        let e = RunConfig::from_json(r#"{"dataset_id":"d1"}"#).unwrap_err();
        assert_eq!(e.field, "task");
    }

    #[test]
    fn nested_type_error_path() {
        let e = RunConfig::from_json(r#"{"task":"regression","dataset_id":"d","target":"y","split":{"test_fraction":"x"}}"#)
            .unwrap_err();
        assert_eq!(e.field, "split.test_fraction");
    }

    #[test]
    fn unknown_model() {
        let e = RunConfig::from_json(r#"{"task":"classification","dataset_id":"d","target":"y","models":["svm","nope"]}"#)
            .unwrap_err();
        assert_eq!(e.field, "models[1]");
    }

    #[test]
    fn regression_rejects_classifier_only_model() {
        let e = RunConfig::from_json(r#"{"task":"regression","dataset_id":"d","target":"y","models":["naive_bayes"]}"#)
            .unwrap_err();
        assert_eq!(e.field, "models[0]");
    }

    #[test]
    fn unsupervised_without_target() {
        assert!(RunConfig::from_json(r#"{"task":"unsupervised","dataset_id":"d"}"#).is_ok());
    }

    #[test]
    fn hash_is_stable() {
        let a = RunConfig::from_json(r#"{"task":"unsupervised","dataset_id":"d"}"#).unwrap();
        let b = RunConfig::from_json(r#"{"dataset_id":"d","task":"unsupervised"}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
