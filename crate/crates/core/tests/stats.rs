use autotab_core::stats::{correlation, kendall_tau_b, CorrelationMethod};
use proptest::prelude::*;

/// Second tau-b implementation: counts ties per variable over all pairs and
/// uses `(n0 - n1)(n0 - n2)` in the denominator.
fn tau_b_reference(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let n0 = (n * (n - 1) / 2) as i64;
    let (mut s, mut n1, mut n2) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in 0..i {
            let a = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i64;
            let b = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i64;
            s += a * b;
            n1 += i64::from(a == 0);
            n2 += i64::from(b == 0);
        }
    }
    s as f64 / (((n0 - n1) * (n0 - n2)) as f64).sqrt()
}

fn vectors() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..50).prop_flat_map(|n| {
        let v = prop::collection::vec((-20i32..20).prop_map(|v| v as f64 / 4.0), n);
        (v.clone(), v)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kendall_matches_reference((x, y) in vectors()) {
        match kendall_tau_b(&x, &y) {
            Ok(t) => prop_assert_eq!(t, tau_b_reference(&x, &y)),
            Err(_) => prop_assert!(tau_b_reference(&x, &y).is_nan()),
        }
    }

    #[test]
    fn monotone_invariance((x, y) in vectors()) {
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let affine: Vec<f64> = x.iter().map(|v| 3.0 * v + 7.0).collect();
        if let Ok(r) = correlation(&x, &y, CorrelationMethod::Spearman) {
            prop_assert!((correlation(&cubed, &y, CorrelationMethod::Spearman).unwrap().value - r.value).abs() <= 1e-12);
        }
        if let Ok(r) = correlation(&x, &y, CorrelationMethod::Kendall) {
            prop_assert_eq!(correlation(&cubed, &y, CorrelationMethod::Kendall).unwrap().value, r.value);
        }
        if let Ok(r) = correlation(&x, &y, CorrelationMethod::Pearson) {
            prop_assert!((correlation(&affine, &y, CorrelationMethod::Pearson).unwrap().value - r.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn self_correlation_is_one((x, _) in vectors()) {
        for m in [CorrelationMethod::Pearson, CorrelationMethod::Spearman, CorrelationMethod::Kendall] {
            if let Ok(r) = correlation(&x, &x, m) {
                prop_assert!((r.value - 1.0).abs() <= 1e-12);
                prop_assert!((-1.0..=1.0).contains(&r.value));
            }
        }
    }
}
