//! Grid search with k-fold cross-validation.

use super::metrics::evaluate;
use super::split::{kfold_indices, SplitError};
use crate::models::{fit, Hyperparams, ModelError, ModelSpec, Target};
use crate::preprocess::{PreparePlan, PreprocessError};
use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub hyperparameters: Hyperparams,
    /// Validation primary metric per fold; `None` where fitting failed.
    pub fold_scores: Vec<Option<f64>>,
    /// Mean over folds, present only when every fold succeeded.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: ModelSpec,
    pub candidates: Vec<CandidateScore>,
    pub folds: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TuneError {
    #[error(transparent)]
    Folds(#[from] SplitError),
    #[error("no grid candidate could be fitted: {0}")]
    NoViableCandidate(String),
}

/// Cartesian product of `grid` in key order, the last key varying fastest.
pub fn grid_candidates(grid: &BTreeMap<String, Vec<f64>>) -> Vec<Vec<(String, f64)>> {
    let mut out: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (name, values) in grid {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push((name.clone(), v));
                    c
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, thiserror::Error)]
enum FoldError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

fn score_fold(
    spec: &ModelSpec,
    plan: &PreparePlan,
    x: ArrayView2<'_, f64>,
    target: &Target,
    train: &[usize],
    valid: &[usize],
    names: &[String],
) -> Result<f64, FoldError> {
    let tx = x.select(Axis(0), train);
    let tt = target.select(train);
    let (px, py, prep) = plan.fit_apply(tx.view(), tt.labels())?;
    let fit_target = match (&tt, py) {
        (Target::Classes { n_classes, .. }, Some(labels)) => Target::Classes { labels, n_classes: *n_classes },
        _ => tt,
    };
    let model = fit(spec, px.view(), &fit_target, names)?;
    let vx = x.select(Axis(0), valid);
    Ok(evaluate(&model, Some(&prep), vx.view(), &target.select(valid))?.primary())
}

/// Scores every grid candidate by mean validation primary metric over
/// `folds` folds (stratified for classification) and returns the best,
/// the first in grid order on ties. Preprocessing is refitted inside each
/// fold's training part.
pub fn grid_search(
    template: &ModelSpec,
    grid: &BTreeMap<String, Vec<f64>>,
    x: ArrayView2<'_, f64>,
    target: &Target,
    folds: usize,
    plan: &PreparePlan,
    seed: u64,
) -> Result<TuneResult, TuneError> {
    let fold_rows = kfold_indices(x.nrows(), target.labels(), folds, seed)?;
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("f{j}")).collect();
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = fold_rows
        .iter()
        .enumerate()
        .map(|(k, valid)| {
            let train = fold_rows.iter().enumerate().filter(|(j, _)| *j != k).flat_map(|(_, f)| f.iter().copied());
            let mut train: Vec<usize> = train.collect();
            train.sort_unstable();
            (train, valid)
        })
        .collect();

    let mut candidates = Vec::new();
    let mut best: Option<(f64, ModelSpec)> = None;
    let mut last_error = String::from("empty grid");
    for assignment in grid_candidates(grid) {
        let mut spec = template.clone();
        for (name, value) in &assignment {
            spec.hyperparameters.set(name, *value);
        }
        let fold_scores: Vec<Option<f64>> = splits
            .iter()
            .map(|(train, valid)| match score_fold(&spec, plan, x, target, train, valid, &names) {
                Ok(s) => Some(s),
                Err(e) => {
                    last_error = e.to_string();
                    None
                }
            })
            .collect();
        let mean = fold_scores
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64);
        if let Some(m) = mean {
            if best.as_ref().is_none_or(|(b, _)| m > *b) {
                best = Some((m, spec.clone()));
            }
        }
        candidates.push(CandidateScore { hyperparameters: spec.hyperparameters.clone(), fold_scores, mean });
    }
    let (_, best) = best.ok_or(TuneError::NoViableCandidate(last_error))?;
    Ok(TuneResult { best, candidates, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_order() {
        let mut g = BTreeMap::new();
        g.insert("a".to_string(), vec![1.0, 2.0]);
        g.insert("b".to_string(), vec![3.0, 4.0, 5.0]);
        let c = grid_candidates(&g);
        assert_eq!(c.len(), 6);
        assert_eq!(c[1], vec![("a".to_string(), 1.0), ("b".to_string(), 4.0)]);
        assert_eq!(c[3][0].1, 2.0);
    }

    #[test]
    fn empty_grid_is_single_candidate() {
        assert_eq!(grid_candidates(&BTreeMap::new()), vec![Vec::<(String, f64)>::new()]);
    }
}
