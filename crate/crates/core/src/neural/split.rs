//! Train/test splitting and cross-validation folds.

use crate::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_TEST_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { test_fraction: DEFAULT_TEST_FRACTION, stratified: true, seed: 0 }
    }
}

/// Row indices of each side, both ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("label count {labels} does not match row count {rows}")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("{folds} folds need at least {folds} rows per class; class {class} has {size}")]
    InsufficientRowsForFolds { folds: usize, class: usize, size: usize },
}

fn target_test_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Seeded shuffle split. With `labels` and `spec.stratified`, each class
/// contributes `floor` or `ceil` of its share to the test side; classes with
/// a single row stay in training and are reported in `warnings`.
pub fn train_test_split(n_rows: usize, labels: Option<&[usize]>, spec: &SplitSpec) -> Result<Split, SplitError> {
    if n_rows < 4 {
        return Err(SplitError::TooFewRows { needed: 4, found: n_rows });
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(SplitError::InvalidFraction(spec.test_fraction));
    }
    if let Some(l) = labels {
        if l.len() != n_rows {
            return Err(SplitError::LabelMismatch { labels: l.len(), rows: n_rows });
        }
    }
    let mut rng = seed::rng(spec.seed);
    let mut warnings = Vec::new();
    let mut test = match labels.filter(|_| spec.stratified) {
        None => {
            let mut rows: Vec<usize> = (0..n_rows).collect();
            rows.shuffle(&mut rng);
            rows.truncate(target_test_size(n_rows, spec.test_fraction));
            rows
        }
        Some(labels) => {
            let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (row, &c) in labels.iter().enumerate() {
                strata.entry(c).or_default().push(row);
            }
            for (class, rows) in &strata {
                if rows.len() == 1 {
                    warnings.push(format!("class {class} has a single row; kept in the training set"));
                }
            }
            let eligible: Vec<(usize, usize)> =
                strata.iter().filter(|(_, r)| r.len() >= 2).map(|(&c, r)| (c, r.len())).collect();
            let n_eligible: usize = eligible.iter().map(|(_, n)| n).sum();
            if n_eligible < 2 {
                return Err(SplitError::TooFewRows { needed: 2, found: n_eligible });
            }
            let total = target_test_size(n_eligible, spec.test_fraction);
            // largest remainder allocation, never emptying a class's training side
            let mut take: BTreeMap<usize, usize> = BTreeMap::new();
            let mut rema: Vec<(f64, usize, usize)> = Vec::new();
            for &(c, n) in &eligible {
                let share = n as f64 * total as f64 / n_eligible as f64;
                let base = (share.floor() as usize).min(n - 1);
                take.insert(c, base);
                rema.push((share - base as f64, c, n));
            }
            let mut assigned: usize = take.values().sum();
            rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            while assigned < total {
                let mut progressed = false;
                for &(_, c, n) in &rema {
                    if assigned == total {
                        break;
                    }
                    let t = take.get_mut(&c).expect("class present");
                    if *t < n - 1 {
                        *t += 1;
                        assigned += 1;
                        progressed = true;
                    }
                }
                if !progressed {
                    break;
                }
            }
            let mut test = Vec::with_capacity(total);
            for (c, rows) in strata {
                let mut rows = rows;
                rows.shuffle(&mut rng);
                test.extend_from_slice(&rows[..*take.get(&c).unwrap_or(&0)]);
            }
            test
        }
    };
    test.sort_unstable();
    let mut in_test = vec![false; n_rows];
    for &r in &test {
        in_test[r] = true;
    }
    let train = (0..n_rows).filter(|&r| !in_test[r]).collect();
    Ok(Split { train, test, warnings })
}

/// Assigns `n_rows` rows to `folds` validation folds. With labels, each class
/// is dealt round-robin so per-fold class counts differ by at most one.
pub fn kfold_indices(
    n_rows: usize,
    labels: Option<&[usize]>,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SplitError> {
    if folds < 2 || n_rows < folds {
        return Err(SplitError::InsufficientRowsForFolds { folds: folds.max(2), class: 0, size: n_rows });
    }
    let mut rng = seed::rng(seed);
    let mut out = vec![Vec::new(); folds];
    match labels {
        None => {
            let mut rows: Vec<usize> = (0..n_rows).collect();
            rows.shuffle(&mut rng);
            for (i, r) in rows.into_iter().enumerate() {
                out[i % folds].push(r);
            }
        }
        Some(labels) => {
            let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (row, &c) in labels.iter().enumerate() {
                strata.entry(c).or_default().push(row);
            }
            if let Some((&class, rows)) = strata.iter().find(|(_, r)| r.len() < folds) {
                return Err(SplitError::InsufficientRowsForFolds { folds, class, size: rows.len() });
            }
            let mut next = 0;
            for (_, mut rows) in strata {
                rows.shuffle(&mut rng);
                for r in rows {
                    out[next % folds].push(r);
                    next += 1;
                }
            }
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_rows_quarter() {
        let s = train_test_split(8, None, &SplitSpec { test_fraction: 0.25, stratified: false, seed: 1 }).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (6, 2));
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_half() {
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let s = train_test_split(8, Some(&y), &SplitSpec { test_fraction: 0.5, stratified: true, seed: 3 }).unwrap();
        let ones = s.test.iter().filter(|&&r| y[r] == 1).count();
        assert_eq!((s.test.len(), ones), (4, 2));
    }

    #[test]
    fn deterministic() {
        let spec = SplitSpec { test_fraction: 0.3, stratified: false, seed: 11 };
        assert_eq!(train_test_split(50, None, &spec), train_test_split(50, None, &spec));
    }

    #[test]
    fn singleton_class_stays_in_train() {
        let y = [0, 0, 0, 0, 0, 1];
        let s = train_test_split(6, Some(&y), &SplitSpec { test_fraction: 0.5, stratified: true, seed: 0 }).unwrap();
        assert!(s.train.contains(&5));
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn too_few_rows() {
        assert_eq!(
            train_test_split(3, None, &SplitSpec::default()),
            Err(SplitError::TooFewRows { needed: 4, found: 3 })
        );
    }

    #[test]
    fn folds_partition_rows() {
        let y: Vec<usize> = (0..23).map(|i| i % 3).collect();
        let folds = kfold_indices(23, Some(&y), 5, 2).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for c in 0..3 {
            let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&r| y[r] == c).count()).collect();
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn folds_need_rows_per_class() {
        let y = [0, 0, 0, 1, 1];
        assert!(matches!(kfold_indices(5, Some(&y), 3, 0), Err(SplitError::InsufficientRowsForFolds { class: 1, .. })));
    }
}
