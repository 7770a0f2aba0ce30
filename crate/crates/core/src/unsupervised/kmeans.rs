use super::{check_k, relabel, ClusterAlgorithm, ClusterResult, UnsupervisedError};
use crate::linalg::squared_distance;
use crate::seed;
use ndarray::ArrayView2;
use rand::Rng;

pub const MAX_ITERATIONS: usize = 300;

/// k-means with k-means++ seeding and Lloyd iterations until the assignment
/// stops changing. An emptied cluster takes the row farthest from its
/// current centroid.
pub fn cluster_kmeans(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<ClusterResult, UnsupervisedError> {
    check_k(&x, k)?;
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut centroids = plus_plus(&rows, k, seed);
    let mut assign = vec![usize::MAX; rows.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut dist = vec![0.0; rows.len()];
        for (i, r) in rows.iter().enumerate() {
            let (c, d) = nearest(&centroids, r);
            dist[i] = d;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        repair_empty(&mut assign, &mut dist, k);
        centroids = means(&rows, &assign, k);
        trace.push(rows.iter().zip(&assign).map(|(r, &c)| squared_distance(r, &centroids[c])).sum());
        if !changed {
            converged = true;
            break;
        }
    }

    let raw: Vec<i64> = assign.iter().map(|&c| c as i64).collect();
    let (labels, origin) = relabel(&raw);
    let mut result = ClusterResult::basic(ClusterAlgorithm::Kmeans, labels);
    result.centroids = Some(origin.iter().map(|&c| centroids[c].clone()).collect());
    result.n_iterations = iterations;
    result.converged = converged;
    result.inertia_trace = trace;
    Ok(result)
}

fn plus_plus(rows: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let mut chosen = vec![rng.random_range(0..rows.len())];
    let mut d2: Vec<f64> = rows.iter().map(|r| squared_distance(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = rows.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("positive mass");
            }
            pick
        } else {
            // every row coincides with a centre; take the next unused row
            (0..rows.len()).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(r, &rows[next]));
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn nearest(centroids: &[Vec<f64>], row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = squared_distance(row, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn repair_empty(assign: &mut [usize], dist: &mut [f64], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assign.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let donor = (0..assign.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("k <= n leaves a donor");
        assign[donor] = empty;
        dist[donor] = 0.0;
    }
}

fn means(rows: &[Vec<f64>], assign: &[usize], k: usize) -> Vec<Vec<f64>> {
    let p = rows[0].len();
    let mut sums = vec![vec![0.0; p]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in rows.iter().zip(assign) {
        counts[c] += 1;
        for j in 0..p {
            sums[c][j] += r[j];
        }
    }
    for c in 0..k {
        for v in &mut sums[c] {
            *v /= counts[c].max(1) as f64;
        }
    }
    sums
}
