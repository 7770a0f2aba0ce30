//! CART decision trees, the building block of the forest and boosting models.

use crate::seed::Rng;
use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    Gini { n_classes: usize },
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 0, min_samples_split: 2, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Class proportions (classification) or a single value (regression).
    Leaf { value: Vec<f64> },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// Targets a tree is grown on.
#[derive(Debug, Clone, Copy)]
pub enum TreeTarget<'a> {
    Classes(&'a [usize]),
    Values(&'a [f64]),
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn set_leaf_value(&mut self, index: usize, value: Vec<f64>) {
        self.nodes[index] = Node::Leaf { value };
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Grows a tree on the given rows (repeats allowed, as in a bootstrap
/// sample). `rng` is only consulted when `max_features` subsamples.
pub fn grow(
    x: ArrayView2<'_, f64>,
    rows: &[usize],
    target: TreeTarget<'_>,
    criterion: Criterion,
    params: &TreeParams,
    rng: &mut Rng,
) -> Tree {
    let mut builder = Builder { x, target, criterion, params, rng, nodes: Vec::new() };
    builder.build(rows.to_vec(), 0);
    Tree { nodes: builder.nodes }
}

struct Builder<'a, 'r> {
    x: ArrayView2<'a, f64>,
    target: TreeTarget<'a>,
    criterion: Criterion,
    params: &'a TreeParams,
    rng: &'r mut Rng,
    nodes: Vec<Node>,
}

struct Stats {
    counts: Vec<f64>,
    sum: f64,
    sum_sq: f64,
    n: f64,
}

impl Stats {
    fn new(criterion: Criterion) -> Self {
        let k = match criterion {
            Criterion::Gini { n_classes } => n_classes,
            Criterion::Variance => 0,
        };
        Self { counts: vec![0.0; k], sum: 0.0, sum_sq: 0.0, n: 0.0 }
    }

    fn add(&mut self, target: TreeTarget<'_>, row: usize, sign: f64) {
        match target {
            TreeTarget::Classes(l) => self.counts[l[row]] += sign,
            TreeTarget::Values(v) => {
                self.sum += sign * v[row];
                self.sum_sq += sign * v[row] * v[row];
            }
        }
        self.n += sign;
    }

    /// Node impurity times node size.
    fn weighted_impurity(&self, criterion: Criterion) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini { .. } => self.n - self.counts.iter().map(|c| c * c).sum::<f64>() / self.n,
            Criterion::Variance => (self.sum_sq - self.sum * self.sum / self.n).max(0.0),
        }
    }
}

impl Builder<'_, '_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let value = match self.target {
            TreeTarget::Classes(l) => {
                let Criterion::Gini { n_classes } = self.criterion else { unreachable!() };
                let mut v = vec![0.0; n_classes];
                for &r in rows {
                    v[l[r]] += 1.0;
                }
                let n = rows.len() as f64;
                v.iter_mut().for_each(|c| *c /= n);
                v
            }
            TreeTarget::Values(y) => vec![rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64],
        };
        Node::Leaf { value }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.target {
            TreeTarget::Classes(l) => rows.iter().all(|&r| l[r] == l[rows[0]]),
            TreeTarget::Values(y) => rows.iter().all(|&r| y[r] == y[rows[0]]),
        }
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let index = self.nodes.len();
        self.nodes.push(self.leaf(&rows));
        let depth_ok = self.params.max_depth == 0 || depth < self.params.max_depth;
        if !depth_ok || rows.len() < self.params.min_samples_split.max(2) || self.is_pure(&rows) {
            return index;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return index;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[index] = Node::Split { feature, threshold, left, right };
        index
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match self.params.max_features {
            Some(m) if m < p => {
                let mut f = sample(self.rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    /// Best (feature, threshold) by impurity decrease; ties favour the
    /// smaller feature index, then the smaller threshold.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let mut total = Stats::new(self.criterion);
        for &r in rows {
            total.add(self.target, r, 1.0);
        }
        let parent = total.weighted_impurity(self.criterion);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for feature in self.candidate_features() {
            let col = self.x.column(feature);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut left = Stats::new(self.criterion);
            let mut right = Stats::new(self.criterion);
            for &r in &order {
                right.add(self.target, r, 1.0);
            }
            for w in 0..order.len() - 1 {
                left.add(self.target, order[w], 1.0);
                right.add(self.target, order[w], -1.0);
                let (a, b) = (col[order[w]], col[order[w + 1]]);
                if a == b {
                    continue;
                }
                let gain = parent - left.weighted_impurity(self.criterion) - right.weighted_impurity(self.criterion);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = 0.5 * (a + b);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    #[test]
    fn xor_fits_at_depth_two() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let params = TreeParams { max_depth: 2, ..Default::default() };
        let t = grow(x.view(), &[0, 1, 2, 3], TreeTarget::Classes(&y), Criterion::Gini { n_classes: 2 }, &params, &mut seed::rng(0));
        for (i, row) in x.rows().into_iter().enumerate() {
            let v = t.leaf_value(row.as_slice().unwrap());
            assert_eq!(v[y[i]], 1.0);
        }
        assert_eq!(t.depth(), 2);
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn depth_limit_respected() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0.0, 1.0, 4.0, 9.0];
        let params = TreeParams { max_depth: 1, ..Default::default() };
        let t = grow(x.view(), &[0, 1, 2, 3], TreeTarget::Values(&y), Criterion::Variance, &params, &mut seed::rng(0));
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn midpoint_threshold() {
        let x = array![[1.0], [3.0]];
        let y = [0.0, 1.0];
        let t = grow(x.view(), &[0, 1], TreeTarget::Values(&y), Criterion::Variance, &TreeParams::default(), &mut seed::rng(0));
        assert!(matches!(t.nodes[0], Node::Split { threshold, .. } if threshold == 2.0));
    }
}
