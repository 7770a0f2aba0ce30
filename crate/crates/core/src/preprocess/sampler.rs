//! Class-imbalance oversampling.

use super::PreprocessError;
use crate::linalg::squared_distance;
use crate::seed;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Random,
    Smote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub method: SamplerMethod,
    /// Neighbours considered by SMOTE; ignored by random oversampling.
    pub k_neighbors: usize,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn random(seed: u64) -> Self {
        Self { method: SamplerMethod::Random, k_neighbors: 0, seed }
    }

    pub fn smote(k_neighbors: usize, seed: u64) -> Self {
        Self { method: SamplerMethod::Smote, k_neighbors, seed }
    }
}

/// Per-class row counts, keyed by class index.
pub fn class_counts(y: &[usize]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &c in y {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
}

/// Raises every class to the majority count. Original rows come first, in
/// order; synthetic rows follow, grouped by ascending class.
pub fn oversample(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    spec: &SamplerSpec,
) -> Result<(Array2<f64>, Vec<usize>), PreprocessError> {
    if x.nrows() != y.len() {
        return Err(PreprocessError::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    let counts = class_counts(y);
    if counts.len() < 2 {
        return Err(PreprocessError::SingleClass);
    }
    if spec.method == SamplerMethod::Smote {
        if spec.k_neighbors == 0 {
            return Err(PreprocessError::InvalidSpec("k_neighbors must be at least 1".into()));
        }
    }
    let majority = *counts.values().max().expect("non-empty");
    let mut rng = seed::rng(spec.seed);
    let p = x.ncols();
    let mut synthetic: Vec<f64> = Vec::new();
    let mut labels = y.to_vec();

    for (&class, &count) in &counts {
        if count == majority {
            continue;
        }
        let need = majority - count;
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        match spec.method {
            SamplerMethod::Random => {
                for _ in 0..need {
                    let pick = members[rng.random_range(0..members.len())];
                    synthetic.extend(x.row(pick).iter());
                    labels.push(class);
                }
            }
            SamplerMethod::Smote => {
                let k = spec.k_neighbors;
                if count < k + 1 {
                    return Err(PreprocessError::MinorityTooSmall { class, size: count, k_neighbors: k });
                }
                let neighbors = nearest_within(x, &members, k);
                for _ in 0..need {
                    let a = rng.random_range(0..members.len());
                    let b = neighbors[a][rng.random_range(0..k)];
                    let u: f64 = rng.random();
                    let ra = x.row(members[a]);
                    let rb = x.row(b);
                    synthetic.extend((0..p).map(|j| ra[j] + u * (rb[j] - ra[j])));
                    labels.push(class);
                }
            }
        }
    }

    let added = synthetic.len() / p.max(1);
    let mut out = Array2::<f64>::zeros((x.nrows() + added, p));
    out.slice_mut(ndarray::s![..x.nrows(), ..]).assign(&x);
    for (r, chunk) in synthetic.chunks(p.max(1)).enumerate() {
        for (j, v) in chunk.iter().enumerate() {
            out[[x.nrows() + r, j]] = *v;
        }
    }
    Ok((out, labels))
}

/// For each member, the row indices of its `k` nearest fellow members
/// (Euclidean, ties by smaller row index, self excluded).
fn nearest_within(x: ArrayView2<'_, f64>, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    let rows: Vec<Vec<f64>> = members.iter().map(|&i| x.row(i).to_vec()).collect();
    (0..members.len())
        .map(|a| {
            let mut others: Vec<(f64, usize)> = (0..members.len())
                .filter(|&b| b != a)
                .map(|b| (squared_distance(&rows[a], &rows[b]), members[b]))
                .collect();
            others.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)));
            others.into_iter().take(k).map(|(_, i)| i).collect()
        })
        .collect()
}
