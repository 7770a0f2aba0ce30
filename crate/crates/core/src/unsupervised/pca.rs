use super::UnsupervisedError;
use crate::linalg::{squared_distance, symmetric_eigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Pca,
    KernelPca,
}

/// A fitted projection. PCA keeps the column means and a
/// `features × components` loading matrix; kernel PCA keeps the training
/// rows and `samples × components` dual coefficients already divided by
/// the square root of their eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub method: ProjectionMethod,
    pub components: Array2<f64>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_x: Option<Array2<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_column_means: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_mean: Option<f64>,
}

impl ProjectionModel {
    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    /// Scores of new rows on the fitted components.
    pub fn project(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self.method {
            ProjectionMethod::Pca => {
                let mean = Array1::from(self.mean.clone().expect("pca mean"));
                (&x - &mean).dot(&self.components)
            }
            ProjectionMethod::KernelPca => {
                let train = self.train_x.as_ref().expect("training rows");
                let kernel = self.kernel.expect("kernel");
                let col_means = self.kernel_column_means.as_ref().expect("kernel means");
                let kmean = self.kernel_mean.expect("kernel mean");
                let mut k = Array2::zeros((x.nrows(), train.nrows()));
                for (i, row) in x.rows().into_iter().enumerate() {
                    let row = row.to_vec();
                    for (j, t) in train.rows().into_iter().enumerate() {
                        k[[i, j]] = kernel.eval(&row, t.as_slice().expect("contiguous"));
                    }
                }
                for mut row in k.rows_mut() {
                    let row_mean = row.mean().unwrap_or(0.0);
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = *v - row_mean - col_means[j] + kmean;
                    }
                }
                k.dot(&self.components)
            }
        }
    }

    /// Maps PCA scores back to feature space.
    pub fn reconstruct(&self, scores: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
        let mean = Array1::from(self.mean.clone()?);
        Some(scores.dot(&self.components.t()) + &mean)
    }
}

/// Principal components of the column-centred data, from the sample
/// covariance (divisor `n - 1`).
pub fn fit_pca(x: ArrayView2<'_, f64>, n_components: usize) -> Result<ProjectionModel, UnsupervisedError> {
    let (n, p) = x.dim();
    if n == 0 {
        return Err(UnsupervisedError::EmptyInput);
    }
    let max = n.min(p);
    if n_components > max || n_components == 0 {
        return Err(UnsupervisedError::ComponentCountTooLarge { requested: n_components, max });
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centred = &x - &mean;
    let denom = (n.max(2) - 1) as f64;
    let cov = centred.t().dot(&centred) / denom;
    let eig = symmetric_eigen(cov.view());
    let components = eig.vectors.slice(ndarray::s![.., ..n_components]).to_owned();
    let explained_variance = eig.values[..n_components].iter().map(|v| v.max(0.0)).collect();
    Ok(ProjectionModel {
        method: ProjectionMethod::Pca,
        components,
        explained_variance,
        mean: Some(mean.to_vec()),
        kernel: None,
        train_x: None,
        kernel_column_means: None,
        kernel_mean: None,
    })
}

/// Double-centres a kernel matrix: `K - 1K - K1 + 1K1`.
pub fn center_kernel(k: &Array2<f64>) -> (Array2<f64>, Vec<f64>, f64) {
    let n = k.nrows();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / n as f64).collect();
    let total = col_means.iter().sum::<f64>() / n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
    let c = Array2::from_shape_fn((n, n), |(i, j)| k[[i, j]] - row_means[i] - col_means[j] + total);
    (c, col_means, total)
}

/// Kernel PCA. `gamma` defaults to `1 / n_features` for the RBF kernel.
pub fn fit_kernel_pca(x: ArrayView2<'_, f64>, n_components: usize, kernel: Kernel) -> Result<ProjectionModel, UnsupervisedError> {
    let n = x.nrows();
    if n == 0 {
        return Err(UnsupervisedError::EmptyInput);
    }
    if n_components > n || n_components == 0 {
        return Err(UnsupervisedError::ComponentCountTooLarge { requested: n_components, max: n });
    }
    if let Kernel::Rbf { gamma } = kernel {
        if !(gamma > 0.0) {
            return Err(UnsupervisedError::NonPositiveGamma);
        }
    }
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&rows[i], &rows[j]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    let (centred, col_means, total) = center_kernel(&k);
    let eig = symmetric_eigen(centred.view());
    let scale = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let mut alphas = Array2::zeros((n, n_components));
    let mut explained = Vec::with_capacity(n_components);
    for c in 0..n_components {
        let lambda = eig.values[c];
        if lambda > 1e-12 * scale {
            let s = 1.0 / lambda.sqrt();
            for i in 0..n {
                alphas[[i, c]] = eig.vectors[[i, c]] * s;
            }
        }
        explained.push(lambda.max(0.0) / (n.max(2) - 1) as f64);
    }
    Ok(ProjectionModel {
        method: ProjectionMethod::KernelPca,
        components: alphas,
        explained_variance: explained,
        mean: None,
        kernel: Some(kernel),
        train_x: Some(x.as_standard_layout().into_owned()),
        kernel_column_means: Some(col_means),
        kernel_mean: Some(total),
    })
}
