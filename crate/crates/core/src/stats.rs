//! Correlation coefficients and per-feature distribution summaries.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
    Kendall,
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Kendall => "kendall",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub method: CorrelationMethod,
    pub value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooFewObservations,
    #[error("input is constant")]
    ConstantInput,
}

pub fn correlation(x: &[f64], y: &[f64], method: CorrelationMethod) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewObservations);
    }
    let value = match method {
        CorrelationMethod::Pearson => pearson(x, y)?,
        CorrelationMethod::Spearman => pearson(&average_ranks(x), &average_ranks(y))?,
        CorrelationMethod::Kendall => kendall_tau_b(x, y)?,
    };
    Ok(CorrelationResult { method, value, n: x.len() })
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Counts of concordant, discordant, x-only tied and y-only tied pairs.
pub fn pair_counts(x: &[f64], y: &[f64]) -> (u64, u64, u64, u64) {
    let (mut c, mut d, mut tx, mut ty) = (0, 0, 0, 0);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let sx = x[i].partial_cmp(&x[j]).unwrap_or(Ordering::Equal);
            let sy = y[i].partial_cmp(&y[j]).unwrap_or(Ordering::Equal);
            match (sx, sy) {
                (Ordering::Equal, Ordering::Equal) => {}
                (Ordering::Equal, _) => tx += 1,
                (_, Ordering::Equal) => ty += 1,
                (a, b) if a == b => c += 1,
                _ => d += 1,
            }
        }
    }
    (c, d, tx, ty)
}

/// Kendall tau-b, `(C - D) / sqrt((C + D + Tx)(C + D + Ty))`, by pair
/// enumeration.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let (c, d, tx, ty) = pair_counts(x, y);
    let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
    if denom == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((c as f64 - d as f64) / denom)
}

/// Pairwise correlations between columns. Cells involving a constant column
/// are `None`; the diagonal is exactly 1 otherwise.
pub fn correlation_matrix(x: ArrayView2<'_, f64>, method: CorrelationMethod) -> Vec<Vec<Option<f64>>> {
    let p = x.ncols();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).to_vec()).collect();
    let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|v| *v == c[0])).collect();
    let mut m = vec![vec![None; p]; p];
    for i in 0..p {
        if constant[i] || x.nrows() < 2 {
            continue;
        }
        m[i][i] = Some(1.0);
        for j in (i + 1)..p {
            if constant[j] {
                continue;
            }
            let v = correlation(&cols[i], &cols[j], method).ok().map(|r| r.value);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Descriptive statistics for one feature. Skewness and excess kurtosis use
/// population moments and are `None` for a constant column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

pub fn summarize(x: ArrayView2<'_, f64>, names: &[String]) -> Vec<FeatureSummary> {
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let m2 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m3 = col.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            let m4 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            let (skewness, excess_kurtosis) =
                if m2 > 0.0 { (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0)) } else { (None, None) };
            FeatureSummary {
                name: names.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
                mean,
                std: m2.sqrt(),
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                skewness,
                excess_kurtosis,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_linear() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_eq!(correlation(&x, &y, CorrelationMethod::Pearson).unwrap().value, 1.0);
    }

    #[test]
    fn cubic_monotone() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powi(3)).collect();
        assert_eq!(correlation(&x, &y, CorrelationMethod::Spearman).unwrap().value, 1.0);
        assert!(correlation(&x, &y, CorrelationMethod::Pearson).unwrap().value < 1.0);
    }

    #[test]
    fn kendall_three_pairs() {
        let r = correlation(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0], CorrelationMethod::Kendall).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_with_ties() {
        // pairs: (0,1) x-tie, (0,2) C, (1,2) C, (0,3) C, (1,3) C, (2,3) y-tie
        let r = kendall_tau_b(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]).unwrap();
        assert!((r - 4.0 / 25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(correlation(&[1.0], &[1.0, 2.0], CorrelationMethod::Pearson), Err(StatsError::LengthMismatch(1, 2)));
        assert_eq!(correlation(&[1.0, 1.0], &[1.0, 2.0], CorrelationMethod::Spearman), Err(StatsError::ConstantInput));
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn matrix_properties() {
        let x = array![[1.0, 1.0, 5.0, 1.0], [-1.0, -1.0, 5.0, 1.0], [1.0, 1.0, 5.0, -1.0], [-1.0, -1.0, 5.0, -1.0]];
        for method in [CorrelationMethod::Pearson, CorrelationMethod::Spearman, CorrelationMethod::Kendall] {
            let m = correlation_matrix(x.view(), method);
            assert_eq!(m[0][1], Some(1.0));
            assert_eq!(m[2][2], None);
            assert_eq!(m[0][2], None);
            assert_eq!(m[0][3], Some(0.0));
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(m[i][j], m[j][i]);
                }
            }
        }
    }

    #[test]
    fn summary_symmetric_data() {
        let x = array![[-1.0], [0.0], [1.0]];
        let s = &summarize(x.view(), &["a".into()])[0];
        assert_eq!(s.skewness, Some(0.0));
        assert!((s.excess_kurtosis.unwrap() + 1.5).abs() < 1e-12);
    }
}
