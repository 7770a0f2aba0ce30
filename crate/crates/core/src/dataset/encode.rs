use super::schema::category_key;
use super::{Cell, ColumnKind, DataError, RawTable, Schema};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// What a run is asked to do with the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
    #[serde(alias = "clustering")]
    Unsupervised,
}

impl Task {
    pub fn is_supervised(self) -> bool {
        !matches!(self, Task::Unsupervised)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
            Task::Unsupervised => "unsupervised",
        })
    }
}

/// Dense design matrix with one name per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericMatrix {
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
}

impl NumericMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetValues {
    /// Class indices into [`LabelMap::classes`].
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

/// Reversible target encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub target_name: String,
    /// Original labels in sorted order; empty for regression.
    pub classes: Vec<String>,
    pub encoded: TargetValues,
}

impl LabelMap {
    pub fn encode_label(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn decode(&self, index: usize) -> Option<&str> {
        self.classes.get(index).map(String::as_str)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Output of [`encode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoded {
    pub matrix: NumericMatrix,
    pub labels: Option<LabelMap>,
    /// Kind of the source column behind each feature.
    pub feature_kinds: Vec<ColumnKind>,
    /// Source column behind each feature.
    pub source_columns: Vec<String>,
}

/// Encodes a sanitized table into numbers.
///
/// Continuous inputs pass through, binary inputs map to {0, 1} in sorted label
/// order and categorical inputs expand to one-hot blocks named `col=value`.
/// `inputs` restricts the feature columns (kept in table order); by default
/// every non-target column is used.
pub fn encode(
    table: &RawTable,
    schema: &Schema,
    target: Option<&str>,
    task: Task,
    inputs: Option<&[String]>,
) -> Result<Encoded, DataError> {
    if schema.columns.len() != table.n_columns() {
        return Err(DataError::SchemaMismatch("column count differs".into()));
    }
    let target_index = match (task.is_supervised(), target) {
        (true, None) => return Err(DataError::TargetNotFound(String::new())),
        (true, Some(name)) => {
            Some(table.column_index(name).ok_or_else(|| DataError::TargetNotFound(name.to_string()))?)
        }
        (false, Some(name)) => table.column_index(name),
        (false, None) => None,
    };
    if let Some(list) = inputs {
        for name in list {
            if table.column_index(name).is_none() {
                return Err(DataError::InputNotFound(name.clone()));
            }
        }
    }

    let labels = match (task, target_index) {
        (Task::Classification, Some(t)) => Some(encode_classes(table, schema, t)?),
        (Task::Regression, Some(t)) => Some(encode_values(table, schema, t)?),
        _ => None,
    };

    let columns: Vec<usize> = (0..table.n_columns())
        .filter(|&c| Some(c) != target_index)
        .filter(|&c| match inputs {
            Some(list) => list.iter().any(|n| n.trim() == table.column_names[c]),
            None => true,
        })
        .collect();
    if columns.is_empty() {
        return Err(DataError::NoInputs);
    }

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut sources = Vec::new();
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    for &c in &columns {
        let col = &schema.columns[c];
        match col.kind {
            ColumnKind::Continuous => {
                let mut values = Vec::with_capacity(table.n_rows());
                for cell in table.column(c) {
                    match cell {
                        Cell::Number(v) => values.push(*v),
                        other => {
                            return Err(DataError::NonNumericValue {
                                column: col.name.clone(),
                                value: other.label(),
                            })
                        }
                    }
                }
                names.push(col.name.clone());
                kinds.push(ColumnKind::Continuous);
                sources.push(col.name.clone());
                blocks.push(vec![values]);
            }
            ColumnKind::Binary => {
                let levels = sorted_levels(table, c);
                let values = table
                    .column(c)
                    .map(|cell| if category_key(cell) == category_key(&levels[0]) { 0.0 } else { 1.0 })
                    .collect();
                names.push(col.name.clone());
                kinds.push(ColumnKind::Binary);
                sources.push(col.name.clone());
                blocks.push(vec![values]);
            }
            ColumnKind::Categorical => {
                let levels = sorted_levels(table, c);
                let keys: Vec<String> = levels.iter().map(category_key).collect();
                let mut one_hot = vec![vec![0.0; table.n_rows()]; levels.len()];
                for (r, cell) in table.column(c).enumerate() {
                    let k = category_key(cell);
                    if let Some(pos) = keys.iter().position(|x| *x == k) {
                        one_hot[pos][r] = 1.0;
                    }
                }
                for level in &levels {
                    names.push(format!("{}={}", col.name, level.label()));
                    kinds.push(ColumnKind::Categorical);
                    sources.push(col.name.clone());
                }
                blocks.push(one_hot);
            }
        }
    }

    let n_features = names.len();
    let mut values = Array2::<f64>::zeros((table.n_rows(), n_features));
    let mut j = 0;
    for block in blocks {
        for column in block {
            for (r, v) in column.into_iter().enumerate() {
                values[[r, j]] = v;
            }
            j += 1;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DataError::MalformedInput { line: 0, message: "non-finite value after encoding".into() });
    }
    Ok(Encoded {
        matrix: NumericMatrix { values, feature_names: names },
        labels,
        feature_kinds: kinds,
        source_columns: sources,
    })
}

fn encode_classes(table: &RawTable, schema: &Schema, t: usize) -> Result<LabelMap, DataError> {
    let col = &schema.columns[t];
    if col.kind == ColumnKind::Continuous {
        return Err(DataError::TaskKindMismatch {
            task: Task::Classification.to_string(),
            target: col.name.clone(),
            kind: col.kind,
        });
    }
    let levels = sorted_levels(table, t);
    let keys: Vec<String> = levels.iter().map(category_key).collect();
    let encoded = table
        .column(t)
        .map(|cell| keys.iter().position(|k| *k == category_key(cell)).expect("level present"))
        .collect();
    Ok(LabelMap {
        target_name: col.name.clone(),
        classes: levels.iter().map(Cell::label).collect(),
        encoded: TargetValues::Classes(encoded),
    })
}

fn encode_values(table: &RawTable, schema: &Schema, t: usize) -> Result<LabelMap, DataError> {
    let col = &schema.columns[t];
    if col.kind != ColumnKind::Continuous {
        return Err(DataError::TaskKindMismatch {
            task: Task::Regression.to_string(),
            target: col.name.clone(),
            kind: col.kind,
        });
    }
    let mut values = Vec::with_capacity(table.n_rows());
    for cell in table.column(t) {
        match cell {
            Cell::Number(v) => values.push(*v),
            other => return Err(DataError::NonNumericValue { column: col.name.clone(), value: other.label() }),
        }
    }
    Ok(LabelMap { target_name: col.name.clone(), classes: Vec::new(), encoded: TargetValues::Values(values) })
}

/// Distinct levels of a column: numerically sorted when every level is a
/// number, otherwise sorted by label text.
fn sorted_levels(table: &RawTable, c: usize) -> Vec<Cell> {
    let mut by_key: BTreeMap<String, Cell> = BTreeMap::new();
    for cell in table.column(c) {
        if !cell.is_missing() {
            by_key.entry(category_key(cell)).or_insert_with(|| cell.clone());
        }
    }
    let mut levels: Vec<Cell> = by_key.into_values().collect();
    let all_numeric = levels.iter().all(|l| matches!(l, Cell::Number(_)));
    levels.sort_by(|a, b| match (a, b) {
        (Cell::Number(x), Cell::Number(y)) if all_numeric => x.total_cmp(y),
        _ => a.label().cmp(&b.label()).then(Ordering::Equal),
    });
    levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{infer_schema, sanitize};

    fn prep(columns: &[&str], rows: &[&[&str]]) -> (RawTable, Schema) {
        let t = RawTable::from_strings(columns, rows).unwrap();
        let s = infer_schema(&t, 2).unwrap();
        (sanitize(&t, &s).unwrap(), s)
    }

    #[test]
    fn one_hot_expansion() {
        let (t, s) = prep(&["x", "c", "y"], &[&["0.5", "a", "no"], &["1.5", "b", "yes"], &["2.5", "c", "yes"]]);
        let e = encode(&t, &s, Some("y"), Task::Classification, None).unwrap();
        assert_eq!(e.matrix.feature_names, vec!["x", "c=a", "c=b", "c=c"]);
        for r in 0..3 {
            let block: f64 = (1..4).map(|j| e.matrix.values[[r, j]]).sum();
            assert_eq!(block, 1.0);
        }
        let labels = e.labels.unwrap();
        assert_eq!(labels.classes, vec!["no", "yes"]);
        assert_eq!(labels.encoded, TargetValues::Classes(vec![0, 1, 1]));
    }

    #[test]
    fn binary_input_sorted_mapping() {
        let (t, s) = prep(&["flag", "v"], &[&["yes", "1"], &["no", "2"], &["yes", "3"]]);
        let e = encode(&t, &s, None, Task::Unsupervised, None).unwrap();
        assert_eq!(e.matrix.values.column(0).to_vec(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn regression_on_categorical_target_rejected() {
        let (t, s) = prep(&["x", "y"], &[&["1", "a"], &["2", "b"], &["3", "c"]]);
        let err = encode(&t, &s, Some("y"), Task::Regression, None).unwrap_err();
        assert!(matches!(err, DataError::TaskKindMismatch { .. }));
    }

    #[test]
    fn unknown_target() {
        let (t, s) = prep(&["x", "y"], &[&["1", "a"], &["2", "b"]]);
        let err = encode(&t, &s, Some("nope"), Task::Classification, None).unwrap_err();
        assert!(matches!(err, DataError::TargetNotFound(_)));
    }

    #[test]
    fn inputs_restrict_features() {
        let (t, s) = prep(&["x", "z", "y"], &[&["1", "5", "a"], &["2", "6", "b"], &["3", "7", "b"]]);
        let inputs = vec!["z".to_string()];
        let e = encode(&t, &s, Some("y"), Task::Classification, Some(&inputs)).unwrap();
        assert_eq!(e.matrix.feature_names, vec!["z"]);
    }

    #[test]
    fn numeric_labels_sorted_numerically() {
        let (t, s) = prep(&["x", "y"], &[&["1", "10"], &["2", "9"], &["3", "10"]]);
        let e = encode(&t, &s, Some("y"), Task::Classification, None).unwrap();
        assert_eq!(e.labels.unwrap().classes, vec!["9", "10"]);
    }
}
