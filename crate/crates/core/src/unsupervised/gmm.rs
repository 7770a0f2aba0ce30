use super::{check_k, cluster_kmeans, relabel, ClusterAlgorithm, ClusterResult, UnsupervisedError};
use crate::linalg::{cholesky, cholesky_log_det, forward_substitute};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Added to every covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 200;
/// Relative log-likelihood change that counts as converged.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

struct Factored {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Array2<f64>,
    log_det: f64,
}

/// Full-covariance Gaussian mixture fitted by EM, initialised from k-means.
/// `log_likelihood` holds the total log-likelihood of the data under the
/// parameters entering each E-step.
pub fn fit_gmm(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<ClusterResult, UnsupervisedError> {
    check_k(&x, k)?;
    let n = x.nrows();
    let init = cluster_kmeans(x, k, seed)?;
    let mut resp = Array2::<f64>::zeros((n, k));
    for (i, &l) in init.labels.iter().enumerate() {
        resp[[i, l as usize]] = 1.0;
    }
    let mut components = m_step(x, &resp);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let ll = e_step(x, &components, &mut resp);
        let done = trace.last().is_some_and(|&prev: &f64| ((ll - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < TOLERANCE);
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
        components = m_step(x, &resp);
    }
    if !converged {
        e_step(x, &components, &mut resp);
    }

    let raw: Vec<i64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = resp.row(i).to_vec();
            crate::models::argmax(&row) as i64
        })
        .collect();
    let (labels, origin) = relabel(&raw);
    let mut ordered: Vec<GaussianComponent> = origin.iter().map(|&c| components[c].clone()).collect();
    for (c, comp) in components.iter().enumerate() {
        if !origin.contains(&c) {
            ordered.push(comp.clone());
        }
    }
    let mut result = ClusterResult::basic(ClusterAlgorithm::Gmm, labels);
    result.centroids = Some(ordered.iter().map(|c| c.mean.clone()).collect());
    result.components = Some(ordered);
    result.n_iterations = iterations;
    result.converged = converged;
    result.log_likelihood = trace;
    Ok(result)
}

/// Per-row responsibilities for the given components.
pub fn responsibilities(x: ArrayView2<'_, f64>, components: &[GaussianComponent]) -> Array2<f64> {
    let mut resp = Array2::zeros((x.nrows(), components.len()));
    e_step(x, components, &mut resp);
    resp
}

fn factor(components: &[GaussianComponent]) -> Vec<Factored> {
    components
        .iter()
        .map(|c| {
            let p = c.mean.len();
            let mut cov = Array2::from_shape_fn((p, p), |(a, b)| c.covariance[a][b]);
            let mut jitter = COVARIANCE_RIDGE;
            let chol = loop {
                if let Some(l) = cholesky(cov.view()) {
                    break l;
                }
                for a in 0..p {
                    cov[[a, a]] += jitter;
                }
                jitter *= 10.0;
            };
            let log_det = cholesky_log_det(&chol);
            Factored { log_weight: c.weight.max(f64::MIN_POSITIVE).ln(), mean: c.mean.clone(), chol, log_det }
        })
        .collect()
}

fn e_step(x: ArrayView2<'_, f64>, components: &[GaussianComponent], resp: &mut Array2<f64>) -> f64 {
    let p = x.ncols() as f64;
    let factored = factor(components);
    let mut total = 0.0;
    for (i, row) in x.rows().into_iter().enumerate() {
        let logs: Vec<f64> = factored
            .iter()
            .map(|f| {
                let diff: Vec<f64> = row.iter().zip(&f.mean).map(|(a, b)| a - b).collect();
                let z = forward_substitute(&f.chol, &diff);
                let maha: f64 = z.iter().map(|v| v * v).sum();
                f.log_weight - 0.5 * (p * (2.0 * PI).ln() + f.log_det + maha)
            })
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        let lse = m + s.ln();
        total += lse;
        for (c, l) in logs.iter().enumerate() {
            resp[[i, c]] = (l - lse).exp();
        }
    }
    total
}

fn m_step(x: ArrayView2<'_, f64>, resp: &Array2<f64>) -> Vec<GaussianComponent> {
    let (n, p) = x.dim();
    (0..resp.ncols())
        .map(|c| {
            let weights = resp.column(c);
            let nk: f64 = weights.sum();
            let mut mean = vec![0.0; p];
            let mut cov = vec![vec![0.0; p]; p];
            if nk > 0.0 {
                for (row, &w) in x.rows().into_iter().zip(weights) {
                    for j in 0..p {
                        mean[j] += w * row[j];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= nk);
                for (row, &w) in x.rows().into_iter().zip(weights) {
                    for a in 0..p {
                        let da = row[a] - mean[a];
                        for b in 0..=a {
                            cov[a][b] += w * da * (row[b] - mean[b]);
                        }
                    }
                }
                for a in 0..p {
                    for b in 0..=a {
                        cov[a][b] /= nk;
                        cov[b][a] = cov[a][b];
                    }
                }
            }
            for (a, row) in cov.iter_mut().enumerate() {
                row[a] += COVARIANCE_RIDGE;
            }
            GaussianComponent { weight: nk / n as f64, mean, covariance: cov }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_component_closed_form() {
        let x = array![[0.0, 1.0], [2.0, 1.0], [4.0, 4.0]];
        let r = fit_gmm(x.view(), 1, 0).unwrap();
        let c = &r.components.unwrap()[0];
        assert_eq!(c.mean, vec![2.0, 2.0]);
        // population covariance plus the ridge
        assert!((c.covariance[0][0] - (8.0 / 3.0 + COVARIANCE_RIDGE)).abs() < 1e-12);
        assert!((c.covariance[0][1] - 2.0).abs() < 1e-12);
        assert!((c.covariance[1][1] - (2.0 + COVARIANCE_RIDGE)).abs() < 1e-12);
    }

    #[test]
    fn separated_blobs_confident() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.01;
            rows.push([t, -t]);
            rows.push([20.0 + t, 20.0 + t * 0.5]);
        }
        let x = Array2::from_shape_fn((40, 2), |(i, j)| rows[i][j]);
        let r = fit_gmm(x.view(), 2, 1).unwrap();
        let comps = r.components.clone().unwrap();
        let resp = responsibilities(x.view(), &comps);
        for i in 0..40 {
            assert!(resp[[i, r.labels[i] as usize]] >= 0.999);
            assert_eq!(r.labels[i], (i % 2) as i64);
        }
        assert!(r.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    }
}
