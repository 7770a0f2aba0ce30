use super::tree::{grow, Criterion, Tree, TreeParams, TreeTarget};
use super::{argmax, Hyperparams, ModelError, Target};
use crate::seed;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bagged CART trees. Classification takes a majority vote over the trees'
/// predicted classes; regression averages the tree outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: Option<usize>,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let width = self.n_classes.unwrap_or(1);
        let mut out = Array2::zeros((x.nrows(), width));
        let share = 1.0 / self.trees.len() as f64;
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for t in &self.trees {
                let v = t.leaf_value(&row);
                match self.n_classes {
                    Some(_) => out[[i, argmax(v)]] += share,
                    None => out[[i, 0]] += v[0] * share,
                }
            }
        }
        out
    }
}

pub(crate) fn fit_forest(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams, seed: u64) -> Result<ForestModel, ModelError> {
    let n = x.nrows();
    if n < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: n });
    }
    let n_trees = hp.usize_or("n_trees", 100);
    let bootstrap = hp.flag_or("bootstrap", true);
    let params = TreeParams {
        max_depth: hp.usize_or("max_depth", 0),
        min_samples_split: hp.usize_or("min_samples_split", 2),
        max_features: hp.get("max_features").map(|v| v as usize),
    };
    let (tree_target, criterion) = match target {
        Target::Classes { labels, n_classes } => (TreeTarget::Classes(labels), Criterion::Gini { n_classes: *n_classes }),
        Target::Values(v) => (TreeTarget::Values(v), Criterion::Variance),
    };
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed ^ t as u64);
            let rows: Vec<usize> = if bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            grow(x, &rows, tree_target, criterion, &params, &mut rng)
        })
        .collect();
    Ok(ForestModel { n_classes: target.n_classes(), trees })
}

#[cfg(test)]
mod tests {
    use super::super::tree::{grow, Criterion, TreeParams, TreeTarget};
    use crate::models::{fit, Algorithm, ModelSpec, Target, Task};
    use crate::seed;
    use ndarray::Array2;

    #[test]
    fn single_deterministic_tree_equals_cart() {
        let mut x = Array2::zeros((30, 3));
        let mut y = Vec::new();
        for i in 0..30 {
            x[[i, 0]] = (i * 7 % 11) as f64;
            x[[i, 1]] = (i * 3 % 5) as f64;
            x[[i, 2]] = (i % 4) as f64;
            y.push((i * 7 % 11 + i % 4) % 3);
        }
        let spec = ModelSpec::new(Algorithm::RandomForest, Task::Classification, 30, 3, 9)
            .with_param("n_trees", 1.0)
            .with_param("bootstrap", 0.0)
            .with_param("max_features", 3.0);
        let forest = fit(&spec, x.view(), &Target::classes(y.clone(), 3), &["a".into(), "b".into(), "c".into()]).unwrap();
        let rows: Vec<usize> = (0..30).collect();
        let tree = grow(x.view(), &rows, TreeTarget::Classes(&y), Criterion::Gini { n_classes: 3 }, &TreeParams::default(), &mut seed::rng(0));
        let probe = x.mapv(|v| v + 0.3);
        let expected: Vec<usize> = probe.rows().into_iter().map(|r| crate::models::argmax(tree.leaf_value(&r.to_vec()))).collect();
        assert_eq!(forest.predict_classes(probe.view()).unwrap(), expected);
    }
}
