//! Preset hyperparameters, loaded from the versioned JSON catalog shipped
//! with the crate.

use super::{Algorithm, Hyperparams, ModelError, ModelSpec, Task};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;

pub const CATALOG_JSON: &str = include_str!("../../catalog/hyperparameters.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: String,
    pub algorithms: BTreeMap<String, AlgorithmEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    pub tasks: Vec<Task>,
    pub params: BTreeMap<String, ParamRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    /// `None` when the default depends on the data shape.
    pub default: Option<f64>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub min_exclusive: bool,
    #[serde(default)]
    pub integer: bool,
    /// Candidate values tried during tuning.
    #[serde(default)]
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ParamRange {
    fn check(&self, name: &str, value: f64) -> Result<(), ModelError> {
        let fail = |reason: String| Err(ModelError::InvalidHyperparameter { name: name.to_string(), value, reason });
        if !value.is_finite() {
            return fail("not finite".into());
        }
        if self.integer && value.fract() != 0.0 {
            return fail("must be an integer".into());
        }
        if let Some(min) = self.min {
            if value < min || (self.min_exclusive && value == min) {
                let op = if self.min_exclusive { ">" } else { ">=" };
                return fail(format!("must be {op} {min}"));
            }
        }
        if let Some(max) = self.max {
            if value > max {
                return fail(format!("must be <= {max}"));
            }
        }
        Ok(())
    }
}

pub fn catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(|| serde_json::from_str(CATALOG_JSON).expect("bundled catalog is valid"))
}

fn entry(algorithm: Algorithm) -> &'static AlgorithmEntry {
    &catalog().algorithms[algorithm.name()]
}

/// Default hyperparameters with shape-dependent values filled in.
pub(crate) fn defaults(algorithm: Algorithm, task: Task, n_rows: usize, n_features: usize) -> Hyperparams {
    let mut hp = Hyperparams::default();
    for (name, range) in &entry(algorithm).params {
        if let Some(v) = range.default {
            hp.set(name, v);
        }
    }
    match algorithm {
        Algorithm::RandomForest => hp.set("max_features", default_max_features(task, n_features) as f64),
        Algorithm::Knn => {
            let k = hp.f64_or("k", 5.0);
            hp.set("k", k.min(n_rows.max(1) as f64));
        }
        _ => {}
    }
    hp
}

/// `ceil(sqrt(p))` features per split for classification, `ceil(p / 3)` for regression.
pub fn default_max_features(task: Task, n_features: usize) -> usize {
    let p = n_features.max(1) as f64;
    let m = match task {
        Task::Regression => (p / 3.0).ceil(),
        _ => p.sqrt().ceil(),
    };
    (m as usize).max(1)
}

pub(crate) fn validate_params(algorithm: Algorithm, hp: &Hyperparams) -> Result<(), ModelError> {
    let e = entry(algorithm);
    for (name, value) in &hp.0 {
        match e.params.get(name) {
            Some(range) => range.check(name, *value)?,
            None => {
                return Err(ModelError::InvalidHyperparameter {
                    name: name.clone(),
                    value: *value,
                    reason: format!("not a parameter of {algorithm}"),
                })
            }
        }
    }
    Ok(())
}

/// Tuning grid for an algorithm: every catalog parameter that lists candidates.
pub fn tuning_grid(algorithm: Algorithm) -> BTreeMap<String, Vec<f64>> {
    entry(algorithm)
        .params
        .iter()
        .filter(|(_, r)| !r.grid.is_empty())
        .map(|(n, r)| (n.clone(), r.grid.clone()))
        .collect()
}

/// Models to train for a task. Without a selection this is the whole catalog
/// for the task, in catalog order; a selection keeps catalog order too.
pub fn get_models(
    task: Task,
    n_rows: usize,
    n_features: usize,
    selection: Option<&[String]>,
    seed: u64,
) -> Result<Vec<ModelSpec>, ModelError> {
    let chosen: Vec<Algorithm> = match selection {
        None => Algorithm::ALL.into_iter().filter(|a| a.supports(task)).collect(),
        Some(names) => {
            let mut picked = Vec::new();
            for n in names {
                let a: Algorithm = n.parse()?;
                if !a.supports(task) {
                    return Err(ModelError::UnsupportedTask { algorithm: a, task });
                }
                picked.push(a);
            }
            Algorithm::ALL.into_iter().filter(|a| picked.contains(a)).collect()
        }
    };
    Ok(chosen
        .into_iter()
        .map(|a| ModelSpec::new(a, task, n_rows, n_features, crate::seed::derive(seed, crate::seed::label_hash(a.name()))))
        .collect())
}
