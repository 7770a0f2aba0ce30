use super::{check_k, relabel, ClusterAlgorithm, ClusterResult, UnsupervisedError};
use crate::linalg::squared_distance;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

/// One step of the merge tree. Leaves are `0..n`; the cluster created by
/// merge `m` has id `n + m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Bottom-up clustering with Lance-Williams updates. The full dendrogram is
/// always built; labels come from stopping after `n - k` merges. Equal
/// distances merge the pair with the smallest slot indices first.
pub fn cluster_agglomerative(x: ArrayView2<'_, f64>, k: usize, linkage: Linkage) -> Result<ClusterResult, UnsupervisedError> {
    check_k(&x, k)?;
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = squared_distance(&rows[i], &rows[j]).sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut nn: Vec<(f64, usize)> = (0..n).map(|i| nearest_after(&d, &active, i)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut labels_at_k: Option<Vec<i64>> = if k == n { Some((0..n as i64).collect()) } else { None };

    for step in 0..n.saturating_sub(1) {
        let (i, (dist, j)) = (0..n)
            .filter(|&i| active[i] && nn[i].1 != usize::MAX)
            .map(|i| (i, nn[i]))
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .expect("two active clusters remain");
        merges.push(Merge { left: node_id[i], right: node_id[j], distance: dist, size: size[i] + size[j] });
        for r in 0..n {
            if active[r] && r != i && r != j {
                let v = match linkage {
                    Linkage::Single => d[i][r].min(d[j][r]),
                    Linkage::Complete => d[i][r].max(d[j][r]),
                    Linkage::Average => {
                        (size[i] as f64 * d[i][r] + size[j] as f64 * d[j][r]) / (size[i] + size[j]) as f64
                    }
                };
                d[i][r] = v;
                d[r][i] = v;
            }
        }
        active[j] = false;
        size[i] += size[j];
        node_id[i] = n + step;
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);

        for r in 0..n {
            if !active[r] {
                continue;
            }
            if r == i || nn[r].1 == i || nn[r].1 == j {
                nn[r] = nearest_after(&d, &active, r);
            } else if r < i && (d[r][i] < nn[r].0 || (d[r][i] == nn[r].0 && i < nn[r].1)) {
                nn[r] = (d[r][i], i);
            }
        }

        if n - (step + 1) == k {
            let mut raw = vec![0i64; n];
            for (slot, m) in members.iter().enumerate() {
                for &row in m {
                    raw[row] = slot as i64;
                }
            }
            labels_at_k = Some(raw);
        }
    }

    let (labels, _) = relabel(&labels_at_k.expect("cut reached"));
    let mut result = ClusterResult::basic(ClusterAlgorithm::Agglomerative, labels);
    result.n_iterations = n - k;
    result.dendrogram = Some(merges);
    Ok(result)
}

fn nearest_after(d: &[Vec<f64>], active: &[bool], i: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for j in (i + 1)..d.len() {
        if active[j] && d[i][j] < best.0 {
            best = (d[i][j], j);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn nearest_pair_first() {
        let x = array![[0.0], [1.0], [10.0]];
        let r = cluster_agglomerative(x.view(), 2, Linkage::Single).unwrap();
        assert_eq!(r.labels, vec![0, 0, 1]);
        let tree = r.dendrogram.unwrap();
        assert_eq!((tree[0].left, tree[0].right, tree[0].distance), (0, 1, 1.0));
        assert_eq!((tree[1].left, tree[1].right, tree[1].size), (3, 2, 3));
    }

    #[test]
    fn k_equals_n_no_merges() {
        let x = array![[0.0], [1.0], [10.0]];
        let r = cluster_agglomerative(x.view(), 3, Linkage::Complete).unwrap();
        assert_eq!(r.labels, vec![0, 1, 2]);
    }

    #[test]
    fn linkages_agree_on_separated_pairs() {
        let x = array![[0.0, 0.0], [0.2, 0.0], [9.0, 9.0], [9.0, 9.3]];
        for l in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            assert_eq!(cluster_agglomerative(x.view(), 2, l).unwrap().labels, vec![0, 0, 1, 1]);
        }
    }

    #[test]
    fn average_linkage_distance() {
        let x = array![[0.0], [2.0], [5.0]];
        let r = cluster_agglomerative(x.view(), 1, Linkage::Average).unwrap();
        let tree = r.dendrogram.unwrap();
        assert_eq!(tree[1].distance, 4.0);
        assert_eq!(r.labels, vec![0, 0, 0]);
    }
}
