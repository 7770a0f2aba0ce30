use autotab_core::linalg::symmetric_eigen;
use autotab_core::seed;
use autotab_core::unsupervised::{
    cluster_agglomerative, cluster_dbscan, cluster_kmeans, fit_gmm, fit_kernel_pca, fit_pca, Kernel, Linkage,
};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_blobs(seed: u64, k: usize, per: usize, p: usize) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut x = Array2::zeros((k * per, p));
    for c in 0..k {
        let center: Vec<f64> = (0..p).map(|_| rng.random_range(-6.0..6.0)).collect();
        let spread: Vec<f64> = (0..p).map(|_| rng.random_range(0.3..1.5)).collect();
        let shear = rng.random_range(-0.8..0.8);
        for i in 0..per {
            let z: Vec<f64> = (0..p).map(|_| unit.sample(&mut rng)).collect();
            for j in 0..p {
                let extra = if j > 0 { shear * z[j - 1] } else { 0.0 };
                x[[c * per + i, j]] = center[j] + spread[j] * z[j] + extra;
            }
        }
    }
    x
}

/// Real roots of the characteristic polynomial of a symmetric 3x3 matrix,
/// by the trigonometric formula.
fn char_poly_roots(a: &Array2<f64>) -> [f64; 3] {
    let q = (a[[0, 0]] + a[[1, 1]] + a[[2, 2]]) / 3.0;
    let p1 = a[[0, 1]].powi(2) + a[[0, 2]].powi(2) + a[[1, 2]].powi(2);
    let p2 = (a[[0, 0]] - q).powi(2) + (a[[1, 1]] - q).powi(2) + (a[[2, 2]] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = Array2::from_shape_fn((3, 3), |(i, j)| (a[[i, j]] - if i == j { q } else { 0.0 }) / p);
    let det = b[[0, 0]] * (b[[1, 1]] * b[[2, 2]] - b[[1, 2]] * b[[2, 1]]) - b[[0, 1]] * (b[[1, 0]] * b[[2, 2]] - b[[1, 2]] * b[[2, 0]])
        + b[[0, 2]] * (b[[1, 0]] * b[[2, 1]] - b[[1, 1]] * b[[2, 0]]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

#[test]
fn jacobi_matches_characteristic_polynomial() {
    let mut rng = seed::rng(40);
    for _ in 0..50 {
        let mut a = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..=i {
                let v = rng.random_range(-5.0..5.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        let eig = symmetric_eigen(a.view());
        let roots = char_poly_roots(&a);
        for c in 0..3 {
            assert!((eig.values[c] - roots[c]).abs() < 1e-8);
            let v = eig.vectors.column(c);
            let residual = &a.dot(&v) - &(&v * eig.values[c]);
            assert!(residual.iter().all(|r| r.abs() < 1e-8));
        }
    }
}

#[test]
fn linear_kernel_pca_matches_pca() {
    let x = random_blobs(3, 2, 15, 3);
    let pca = fit_pca(x.view(), 2).unwrap();
    let kpca = fit_kernel_pca(x.view(), 2, Kernel::Linear).unwrap();
    let a = pca.project(x.view());
    let b = kpca.project(x.view());
    for c in 0..2 {
        let sign = if a[[0, c]] * b[[0, c]] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..x.nrows() {
            assert!((a[[i, c]] - sign * b[[i, c]]).abs() < 1e-6);
        }
    }
}

#[test]
fn pca_components_orthonormal_and_centred() {
    let x = random_blobs(5, 3, 10, 4);
    let m = fit_pca(x.view(), 4).unwrap();
    let gram = m.components.t().dot(&m.components);
    for i in 0..4 {
        for j in 0..4 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((gram[[i, j]] - e).abs() < 1e-8);
        }
    }
    assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    let scores = m.project(x.view());
    for v in scores.mean_axis(Axis(0)).unwrap() {
        assert!(v.abs() < 1e-8);
    }
}

fn same_partition(a: &[i64], b: &[i64]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j]) && ((a[i] < 0) == (b[i] < 0))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gmm_log_likelihood_never_drops(seed in 0u64..10_000, k in 2usize..4, p in 1usize..4) {
        let x = random_blobs(seed, k, 25, p);
        let r = fit_gmm(x.view(), k, seed).unwrap();
        for w in r.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn kmeans_inertia_never_rises(seed in 0u64..10_000, k in 1usize..6) {
        let x = random_blobs(seed, 3, 12, 2);
        let r = cluster_kmeans(x.view(), k, seed).unwrap();
        prop_assert!(r.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let mut seen: Vec<i64> = r.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen, (0..k as i64).collect::<Vec<_>>());
    }

    #[test]
    fn dbscan_partition_ignores_row_order(seed in 0u64..10_000, shift in 1usize..30) {
        let x = random_blobs(seed, 3, 10, 2);
        let n = x.nrows();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        let xp = x.select(Axis(0), &perm);
        let a = cluster_dbscan(x.view(), 1.2, 4).unwrap();
        let b = cluster_dbscan(xp.view(), 1.2, 4).unwrap();
        let a_perm: Vec<i64> = perm.iter().map(|&i| a.labels[i]).collect();
        prop_assert!(same_partition(&a_perm, &b.labels));
    }

    #[test]
    fn agglomerative_k1_is_one_cluster(seed in 0u64..10_000, linkage in 0usize..3) {
        let x = random_blobs(seed, 2, 6, 2);
        let l = [Linkage::Single, Linkage::Complete, Linkage::Average][linkage];
        let r = cluster_agglomerative(x.view(), 1, l).unwrap();
        prop_assert!(r.labels.iter().all(|&v| v == 0));
        prop_assert_eq!(r.dendrogram.unwrap().len(), x.nrows() - 1);
    }
}
