//! Grid-based counterfactual search.
//!
//! Every single-feature change on a per-feature grid is tried first, and the
//! flipping change with the smallest range-normalised L1 distance wins. When
//! none flips, the change that most raises the desired class probability is
//! kept and the search repeats from there, up to `max_changed_features`.

use super::pdp::linspace;
use super::{ExplainError, ProbabilisticModel};
use crate::models::argmax;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_MAX_CHANGED: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterfactualOptions {
    pub grid_points: usize,
    pub max_changed_features: usize,
}

impl Default for CounterfactualOptions {
    fn default() -> Self {
        Self { grid_points: DEFAULT_GRID_POINTS, max_changed_features: DEFAULT_MAX_CHANGED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualExplanation {
    pub instance: Vec<f64>,
    pub original_class: usize,
    pub desired_class: usize,
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterfactual: Option<Vec<f64>>,
    /// Features that differ from the instance, ascending.
    pub changed_features: Vec<usize>,
    /// Sum over features of `|change| / training range`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    pub evaluations: usize,
}

/// `training` supplies the per-feature search ranges.
pub fn counterfactual(
    model: &dyn ProbabilisticModel,
    instance: &[f64],
    desired_class: usize,
    training: ArrayView2<'_, f64>,
    options: CounterfactualOptions,
) -> Result<CounterfactualExplanation, ExplainError> {
    super::check_instance(instance, &training)?;
    let p = instance.len();
    let start = model.proba(ArrayView2::from_shape((1, p), instance).expect("one row"));
    if desired_class >= start.ncols() {
        return Err(ExplainError::InvalidArgument(format!("class {desired_class} does not exist")));
    }
    let original_class = argmax(&start.row(0).to_vec());
    if original_class == desired_class {
        return Err(ExplainError::AlreadyDesiredClass(desired_class));
    }
    let ranges: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let c = training.column(j);
            (c.iter().copied().fold(f64::INFINITY, f64::min), c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let grids: Vec<Vec<f64>> = ranges
        .iter()
        .map(|&(lo, hi)| if hi > lo { linspace(lo, hi, options.grid_points) } else { Vec::new() })
        .collect();
    let distance = |z: &[f64]| -> f64 {
        (0..p)
            .filter(|&j| ranges[j].1 > ranges[j].0)
            .map(|j| (z[j] - instance[j]).abs() / (ranges[j].1 - ranges[j].0))
            .sum()
    };

    let mut current = instance.to_vec();
    let mut changed: Vec<usize> = Vec::new();
    let mut evaluations = 0;
    for _ in 0..options.max_changed_features.max(1) {
        let mut moves: Vec<(usize, f64)> = Vec::new();
        for j in (0..p).filter(|j| !changed.contains(j)) {
            for &v in &grids[j] {
                if v != current[j] {
                    moves.push((j, v));
                }
            }
        }
        if moves.is_empty() {
            break;
        }
        let mut batch = Array2::zeros((moves.len(), p));
        for (m, &(j, v)) in moves.iter().enumerate() {
            for k in 0..p {
                batch[[m, k]] = current[k];
            }
            batch[[m, j]] = v;
        }
        let proba = model.proba(batch.view());
        evaluations += moves.len();

        let mut best_flip: Option<(f64, usize)> = None;
        let mut best_push: Option<(f64, f64, usize)> = None;
        for m in 0..moves.len() {
            let row = proba.row(m).to_vec();
            let cand = batch.row(m).to_vec();
            let d = distance(&cand);
            if argmax(&row) == desired_class {
                if best_flip.is_none_or(|(bd, _)| d < bd) {
                    best_flip = Some((d, m));
                }
            } else if best_push.is_none_or(|(bp, bd, _)| row[desired_class] > bp || (row[desired_class] == bp && d < bd)) {
                best_push = Some((row[desired_class], d, m));
            }
        }
        if let Some((d, m)) = best_flip {
            let z = batch.row(m).to_vec();
            changed.push(moves[m].0);
            changed.sort_unstable();
            return Ok(CounterfactualExplanation {
                instance: instance.to_vec(),
                original_class,
                desired_class,
                found: true,
                counterfactual: Some(z),
                changed_features: changed,
                distance: Some(d),
                evaluations,
            });
        }
        let Some((_, _, m)) = best_push else { break };
        current = batch.row(m).to_vec();
        changed.push(moves[m].0);
    }
    Ok(CounterfactualExplanation {
        instance: instance.to_vec(),
        original_class,
        desired_class,
        found: false,
        counterfactual: None,
        changed_features: Vec::new(),
        distance: None,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn threshold(x: ArrayView2<'_, f64>) -> Array2<f64> {
        Array2::from_shape_fn((x.nrows(), 2), |(i, c)| {
            let pos = x[[i, 0]] > 0.0;
            if (c == 1) == pos { 1.0 } else { 0.0 }
        })
    }

    #[test]
    fn threshold_flip_is_nearest_grid_point() {
        let training = array![[-1.0, 0.0], [1.0, 5.0]];
        let e = counterfactual(&threshold, &[-0.3, 2.0], 1, training.view(), CounterfactualOptions::default()).unwrap();
        assert!(e.found);
        let z = e.counterfactual.unwrap();
        let grid = linspace(-1.0, 1.0, 50);
        let smallest_positive = grid.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        assert_eq!(z[0], smallest_positive);
        assert_eq!(z[1], 2.0);
        assert_eq!(e.changed_features, vec![0]);
    }

    #[test]
    fn unreachable_class_not_found() {
        let never = |x: ArrayView2<'_, f64>| Array2::from_shape_fn((x.nrows(), 3), |(_, c)| if c == 0 { 0.9 } else { 0.05 });
        let training = array![[-1.0], [1.0]];
        let e = counterfactual(&never, &[0.0], 2, training.view(), CounterfactualOptions::default()).unwrap();
        assert!(!e.found);
        assert!(e.counterfactual.is_none());
    }

    #[test]
    fn already_desired() {
        let training = array![[-1.0], [1.0]];
        let r = counterfactual(&threshold, &[0.5], 1, training.view(), CounterfactualOptions::default());
        assert_eq!(r.unwrap_err(), ExplainError::AlreadyDesiredClass(1));
    }

    #[test]
    fn two_feature_change() {
        // class 1 only when both features are positive
        let both = |x: ArrayView2<'_, f64>| {
            Array2::from_shape_fn((x.nrows(), 2), |(i, c)| {
                let score = x[[i, 0]].min(x[[i, 1]]);
                let p1 = if score > 0.0 { 0.9 } else { 0.4 + 0.1 * score.clamp(-1.0, 0.0) + 0.05 * (x[[i, 0]] + x[[i, 1]]).clamp(-1.0, 1.0) };
                if c == 1 { p1 } else { 1.0 - p1 }
            })
        };
        let training = array![[-1.0, -1.0], [1.0, 1.0]];
        let e = counterfactual(&both, &[-0.5, -0.5], 1, training.view(), CounterfactualOptions::default()).unwrap();
        assert!(e.found);
        assert_eq!(e.changed_features, vec![0, 1]);
        let z = e.counterfactual.unwrap();
        assert!(z[0] > 0.0 && z[1] > 0.0);
    }
}
