use super::{ClusterAlgorithm, ClusterResult, UnsupervisedError};
use crate::linalg::squared_distance;
use ndarray::ArrayView2;

/// DBSCAN. A core row has at least `min_pts` rows (itself included) within
/// `eps`. Clusters are the connected components of core rows, numbered by
/// their first core row. A border row joins the cluster of its nearest core
/// neighbour, so the partition does not depend on row order.
pub fn cluster_dbscan(x: ArrayView2<'_, f64>, eps: f64, min_pts: usize) -> Result<ClusterResult, UnsupervisedError> {
    if x.nrows() == 0 {
        return Err(UnsupervisedError::EmptyInput);
    }
    if !(eps > 0.0) {
        return Err(UnsupervisedError::InvalidSpec("eps must be positive".into()));
    }
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let n = rows.len();
    let eps2 = eps * eps;
    let neighbours: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter_map(|j| {
                    let d = squared_distance(&rows[i], &rows[j]);
                    (d <= eps2).then_some((j, d))
                })
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![-1i64; n];
    let mut next = 0i64;
    for start in 0..n {
        if !core[start] || labels[start] >= 0 {
            continue;
        }
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &(j, _) in &neighbours[i] {
                if core[j] && labels[j] < 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let nearest_core = neighbours[i]
            .iter()
            .filter(|(j, _)| core[*j])
            .min_by(|a, b| a.1.total_cmp(&b.1).then(labels[a.0].cmp(&labels[b.0])));
        if let Some(&(j, _)) = nearest_core {
            labels[i] = labels[j];
        }
    }
    let mut result = ClusterResult::basic(ClusterAlgorithm::Dbscan, labels);
    result.n_iterations = 1;
    Ok(result)
}

/// Radius heuristic: mean distance from each row to its `min_pts`-th nearest
/// row (itself counted first).
pub fn default_eps(x: ArrayView2<'_, f64>, min_pts: usize) -> f64 {
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let n = rows.len();
    if n < 2 {
        return 1.0;
    }
    let k = min_pts.clamp(1, n) - 1;
    let total: f64 = rows
        .iter()
        .map(|r| {
            let mut d: Vec<f64> = rows.iter().map(|o| squared_distance(r, o)).collect();
            d.sort_by(f64::total_cmp);
            d[k].sqrt()
        })
        .sum();
    let eps = total / n as f64;
    if eps > 0.0 { eps } else { 1.0 }
}
