use super::{Hyperparams, ModelError, Target};
use crate::linalg::squared_distance;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// k-nearest neighbours; the fitted state is the training set itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train_x: Array2<f64>,
    pub target: Target,
}

impl KnnModel {
    /// Indices of the `k` nearest training rows, ties broken by row index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .train_x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, t)| (squared_distance(t.as_slice().expect("contiguous"), row), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let width = self.target.n_classes().unwrap_or(1);
        let mut out = Array2::zeros((x.nrows(), width));
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            let nb = self.neighbours(&row);
            let share = 1.0 / nb.len() as f64;
            match &self.target {
                Target::Classes { labels, .. } => {
                    for &j in &nb {
                        out[[i, labels[j]]] += share;
                    }
                }
                Target::Values(v) => out[[i, 0]] = nb.iter().map(|&j| v[j]).sum::<f64>() * share,
            }
        }
        out
    }
}

pub(crate) fn fit_knn(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams) -> Result<KnnModel, ModelError> {
    let k = hp.usize_or("k", 5);
    if k > x.nrows() {
        return Err(ModelError::KTooLarge { k, n_rows: x.nrows() });
    }
    Ok(KnnModel { k, train_x: x.as_standard_layout().into_owned(), target: target.clone() })
}

#[cfg(test)]
mod tests {
    use crate::models::{fit, Algorithm, ModelError, ModelSpec, Target, Task};
    use ndarray::array;

    fn spec(k: f64, task: Task) -> ModelSpec {
        ModelSpec::new(Algorithm::Knn, task, 10, 1, 0).with_param("k", k)
    }

    #[test]
    fn k1_reproduces_training_labels() {
        let x = array![[0.0], [1.0], [2.5], [4.0]];
        let y = vec![1, 0, 2, 0];
        let m = fit(&spec(1.0, Task::Classification), x.view(), &Target::classes(y.clone(), 3), &["x".into()]).unwrap();
        assert_eq!(m.predict_classes(x.view()).unwrap(), y);
    }

    #[test]
    fn majority_of_three() {
        let x = array![[-1.0], [1.0], [2.0], [10.0]];
        let m = fit(&spec(3.0, Task::Classification), x.view(), &Target::classes(vec![0, 0, 1, 1], 2), &["x".into()])
            .unwrap();
        assert_eq!(m.predict_classes(array![[0.0]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn vote_tie_goes_to_smaller_class() {
        let x = array![[-1.0], [1.0]];
        let m = fit(&spec(2.0, Task::Classification), x.view(), &Target::classes(vec![1, 0], 2), &["x".into()]).unwrap();
        assert_eq!(m.predict_classes(array![[0.0]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn distance_tie_goes_to_smaller_row() {
        let x = array![[-1.0], [1.0]];
        let m = fit(&spec(1.0, Task::Classification), x.view(), &Target::classes(vec![1, 0], 2), &["x".into()]).unwrap();
        assert_eq!(m.predict_classes(array![[0.0]].view()).unwrap(), vec![1]);
    }

    #[test]
    fn regression_mean() {
        let x = array![[0.0], [1.0], [5.0]];
        let m = fit(&spec(2.0, Task::Regression), x.view(), &Target::Values(vec![2.0, 4.0, 100.0]), &["x".into()]).unwrap();
        assert_eq!(m.predict(array![[0.4]].view()).unwrap(), vec![3.0]);
    }

    #[test]
    fn k_too_large() {
        let x = array![[0.0], [1.0]];
        let err = fit(&spec(3.0, Task::Classification), x.view(), &Target::classes(vec![0, 1], 2), &["x".into()]);
        assert!(matches!(err, Err(ModelError::KTooLarge { k: 3, n_rows: 2 })));
    }
}
