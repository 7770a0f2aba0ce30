//! Clustering and dimensionality reduction.

mod agglomerative;
mod dbscan;
mod gmm;
mod kmeans;
mod pca;

pub use agglomerative::{cluster_agglomerative, Linkage, Merge};
pub use dbscan::{cluster_dbscan, default_eps};
pub use gmm::{fit_gmm, responsibilities, GaussianComponent};
pub use kmeans::cluster_kmeans;
pub use pca::{center_kernel, fit_kernel_pca, fit_pca, Kernel, ProjectionMethod, ProjectionModel};

use crate::linalg::squared_distance;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterAlgorithm {
    Kmeans,
    Dbscan,
    Agglomerative,
    Gmm,
}

impl ClusterAlgorithm {
    pub const ALL: [ClusterAlgorithm; 4] =
        [ClusterAlgorithm::Kmeans, ClusterAlgorithm::Dbscan, ClusterAlgorithm::Agglomerative, ClusterAlgorithm::Gmm];

    pub fn name(self) -> &'static str {
        match self {
            ClusterAlgorithm::Kmeans => "kmeans",
            ClusterAlgorithm::Dbscan => "dbscan",
            ClusterAlgorithm::Agglomerative => "agglomerative",
            ClusterAlgorithm::Gmm => "gmm",
        }
    }
}

impl fmt::Display for ClusterAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub algorithm: ClusterAlgorithm,
    /// Cluster count for k-means, GMM and the agglomerative cut.
    pub k: usize,
    pub eps: f64,
    pub min_pts: usize,
    pub linkage: Linkage,
    pub seed: u64,
}

impl ClusterSpec {
    pub fn new(algorithm: ClusterAlgorithm, k: usize, seed: u64) -> Self {
        Self { algorithm, k, eps: 0.5, min_pts: 5, linkage: Linkage::Average, seed }
    }

    pub fn dbscan(eps: f64, min_pts: usize) -> Self {
        Self { eps, min_pts, ..Self::new(ClusterAlgorithm::Dbscan, 1, 0) }
    }

    pub fn validate(&self) -> Result<(), UnsupervisedError> {
        if self.k < 1 {
            return Err(UnsupervisedError::InvalidSpec("k must be at least 1".into()));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(UnsupervisedError::InvalidSpec("eps must be positive".into()));
        }
        if self.min_pts < 1 {
            return Err(UnsupervisedError::InvalidSpec("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a clustering run. Labels are contiguous from 0 in order of
/// first appearance; `-1` marks DBSCAN noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub algorithm: ClusterAlgorithm,
    pub labels: Vec<i64>,
    pub n_clusters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centroids: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<GaussianComponent>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dendrogram: Option<Vec<Merge>>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Within-cluster sum of squares per Lloyd iteration (k-means).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub inertia_trace: Vec<f64>,
    /// Log-likelihood per EM iteration (GMM).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub log_likelihood: Vec<f64>,
}

impl ClusterResult {
    pub(crate) fn basic(algorithm: ClusterAlgorithm, labels: Vec<i64>) -> Self {
        let n_clusters = labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0);
        Self {
            algorithm,
            labels,
            n_clusters,
            centroids: None,
            components: None,
            dendrogram: None,
            n_iterations: 0,
            converged: true,
            inertia_trace: Vec::new(),
            log_likelihood: Vec::new(),
        }
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum UnsupervisedError {
    #[error("input has no rows")]
    EmptyInput,
    #[error("k={k} exceeds the {n_rows} rows")]
    KExceedsRows { k: usize, n_rows: usize },
    #[error("{requested} components requested, at most {max} available")]
    ComponentCountTooLarge { requested: usize, max: usize },
    #[error("gamma must be positive")]
    NonPositiveGamma,
    #[error("invalid clustering spec: {0}")]
    InvalidSpec(String),
}

/// Runs the algorithm named in `spec`.
pub fn cluster(x: ArrayView2<'_, f64>, spec: &ClusterSpec) -> Result<ClusterResult, UnsupervisedError> {
    spec.validate()?;
    match spec.algorithm {
        ClusterAlgorithm::Kmeans => cluster_kmeans(x, spec.k, spec.seed),
        ClusterAlgorithm::Dbscan => cluster_dbscan(x, spec.eps, spec.min_pts),
        ClusterAlgorithm::Agglomerative => cluster_agglomerative(x, spec.k, spec.linkage),
        ClusterAlgorithm::Gmm => fit_gmm(x, spec.k, spec.seed),
    }
}

pub(crate) fn check_k(x: &ArrayView2<'_, f64>, k: usize) -> Result<(), UnsupervisedError> {
    if x.nrows() == 0 {
        return Err(UnsupervisedError::EmptyInput);
    }
    if k == 0 {
        return Err(UnsupervisedError::InvalidSpec("k must be at least 1".into()));
    }
    if k > x.nrows() {
        return Err(UnsupervisedError::KExceedsRows { k, n_rows: x.nrows() });
    }
    Ok(())
}

/// Renumbers non-negative labels by order of first appearance. Returns the
/// new labels and, for each new id, the old id it came from.
pub(crate) fn relabel(labels: &[i64]) -> (Vec<i64>, Vec<usize>) {
    let mut map: Vec<(i64, i64)> = Vec::new();
    let mut origin = Vec::new();
    let out = labels
        .iter()
        .map(|&l| {
            if l < 0 {
                return -1;
            }
            if let Some(&(_, new)) = map.iter().find(|(old, _)| *old == l) {
                return new;
            }
            let new = map.len() as i64;
            map.push((l, new));
            origin.push(l as usize);
            new
        })
        .collect();
    (out, origin)
}

/// Mean silhouette over non-noise rows; `None` with fewer than two clusters
/// or when every cluster is a singleton. Singletons score 0.
pub fn silhouette(x: ArrayView2<'_, f64>, labels: &[i64]) -> Option<f64> {
    let n_clusters = labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0);
    if n_clusters < 2 {
        return None;
    }
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut sizes = vec![0usize; n_clusters];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        sizes[l as usize] += 1;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..rows.len() {
        if labels[i] < 0 {
            continue;
        }
        let own = labels[i] as usize;
        count += 1;
        if sizes[own] < 2 {
            continue;
        }
        let mut sums = vec![0.0; n_clusters];
        for j in 0..rows.len() {
            if j != i && labels[j] >= 0 {
                sums[labels[j] as usize] += squared_distance(&rows[i], &rows[j]).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        total += if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    if count == 0 || sizes.iter().all(|&s| s < 2) {
        return None;
    }
    Some(total / count as f64)
}
