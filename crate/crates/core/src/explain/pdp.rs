use super::{ExplainError, ScalarModel};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// Partial dependence of the model output on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpExplanation {
    pub feature: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub background_rows: usize,
}

/// Partial dependence on a pair of features; `values[a][b]` pairs
/// `grid_a[a]` with `grid_b[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpSurface {
    pub features: [usize; 2],
    pub grid_a: Vec<f64>,
    pub grid_b: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// `count` evenly spaced points with the endpoints exactly `lo` and `hi`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            let mut g: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
            g[count - 1] = hi;
            g
        }
    }
}

fn feature_grid(background: &ArrayView2<'_, f64>, feature: usize, points: usize) -> Result<Vec<f64>, ExplainError> {
    if feature >= background.ncols() {
        return Err(ExplainError::FeatureOutOfRange { feature, n_features: background.ncols() });
    }
    if background.nrows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    if points < 2 {
        return Err(ExplainError::InvalidArgument("grid needs at least two points".into()));
    }
    let col = background.column(feature);
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(linspace(lo, hi, points))
}

pub fn pdp(
    model: &dyn ScalarModel,
    background: ArrayView2<'_, f64>,
    feature: usize,
    grid_points: usize,
) -> Result<PdpExplanation, ExplainError> {
    let grid = feature_grid(&background, feature, grid_points)?;
    let n = background.nrows();
    let mut batch = ndarray::Array2::zeros((n * grid.len(), background.ncols()));
    for (g, &v) in grid.iter().enumerate() {
        for i in 0..n {
            let mut row = batch.row_mut(g * n + i);
            row.assign(&background.row(i));
            row[feature] = v;
        }
    }
    let out = model.output(batch.view());
    let values = (0..grid.len()).map(|g| out[g * n..(g + 1) * n].iter().sum::<f64>() / n as f64).collect();
    Ok(PdpExplanation { feature, grid, values, background_rows: n })
}

pub fn pdp_pair(
    model: &dyn ScalarModel,
    background: ArrayView2<'_, f64>,
    features: [usize; 2],
    grid_points: usize,
) -> Result<PdpSurface, ExplainError> {
    let grid_a = feature_grid(&background, features[0], grid_points)?;
    let grid_b = feature_grid(&background, features[1], grid_points)?;
    let n = background.nrows();
    let mut values = Vec::with_capacity(grid_a.len());
    for &a in &grid_a {
        let mut batch = ndarray::Array2::zeros((n * grid_b.len(), background.ncols()));
        for (g, &b) in grid_b.iter().enumerate() {
            for i in 0..n {
                let mut row = batch.row_mut(g * n + i);
                row.assign(&background.row(i));
                row[features[0]] = a;
                row[features[1]] = b;
            }
        }
        let out = model.output(batch.view());
        values.push((0..grid_b.len()).map(|g| out[g * n..(g + 1) * n].iter().sum::<f64>() / n as f64).collect());
    }
    Ok(PdpSurface { features, grid_a, grid_b, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_in_own_feature() {
        let bg = array![[0.0, 5.0], [2.0, 1.0], [4.0, 3.0]];
        let f = |x: ArrayView2<'_, f64>| x.column(0).to_vec();
        let e = pdp(&f, bg.view(), 0, 5).unwrap();
        assert_eq!(e.grid, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.values, e.grid);
    }

    #[test]
    fn constant_in_ignored_feature() {
        let bg = array![[0.0, 5.0], [2.0, 1.0], [4.0, 3.0]];
        let f = |x: ArrayView2<'_, f64>| x.column(1).to_vec();
        let e = pdp(&f, bg.view(), 0, 20).unwrap();
        assert!(e.values.iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert_eq!((e.grid[0], e.grid[19]), (0.0, 4.0));
    }

    #[test]
    fn pair_surface_shape() {
        let bg = array![[0.0, 1.0], [1.0, 0.0]];
        let f = |x: ArrayView2<'_, f64>| x.rows().into_iter().map(|r| r[0] * r[1]).collect::<Vec<_>>();
        let s = pdp_pair(&f, bg.view(), [0, 1], 3).unwrap();
        assert_eq!(s.values.len(), 3);
        assert_eq!(s.values[2][2], 1.0);
    }

    #[test]
    fn bad_feature() {
        let bg = array![[0.0]];
        let f = |x: ArrayView2<'_, f64>| x.column(0).to_vec();
        assert!(matches!(pdp(&f, bg.view(), 1, 5), Err(ExplainError::FeatureOutOfRange { .. })));
    }
}
