use super::{Cell, DataError, RawTable};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub const DEFAULT_CATEGORICAL_THRESHOLD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Binary => "binary",
            ColumnKind::Categorical => "categorical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub missing_count: usize,
    pub distinct_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn get(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name.trim())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// Key under which two cells count as the same category: numbers by value,
/// text by trimmed lowercase spelling.
pub(crate) fn category_key(cell: &Cell) -> String {
    match cell {
        Cell::Text(s) => s.trim().to_lowercase(),
        other => other.label(),
    }
}

/// Assigns each column a kind: all-numeric columns with more than
/// `categorical_threshold` distinct values are continuous, columns with
/// exactly two distinct values are binary, everything else categorical.
pub fn infer_schema(table: &RawTable, categorical_threshold: usize) -> Result<Schema, DataError> {
    if table.rows.is_empty() || table.column_names.is_empty() {
        return Err(DataError::EmptyTable);
    }
    let columns = (0..table.n_columns())
        .map(|c| {
            let mut missing = 0;
            let mut all_numeric = true;
            let mut distinct = BTreeSet::new();
            for cell in table.column(c) {
                match cell {
                    Cell::Missing => missing += 1,
                    Cell::Number(_) => {
                        distinct.insert(category_key(cell));
                    }
                    Cell::Text(_) => {
                        all_numeric = false;
                        distinct.insert(category_key(cell));
                    }
                }
            }
            let distinct_count = distinct.len();
            let kind = if all_numeric && distinct_count > categorical_threshold {
                ColumnKind::Continuous
            } else if distinct_count == 2 {
                ColumnKind::Binary
            } else {
                ColumnKind::Categorical
            };
            ColumnSchema { name: table.column_names[c].clone(), kind, missing_count: missing, distinct_count }
        })
        .collect();
    Ok(Schema { columns })
}

/// Drops every row holding a missing cell, trims text and merges category
/// spellings that differ only by case or surrounding whitespace. The merged
/// spelling is the lexicographically smallest variant present.
pub fn sanitize(table: &RawTable, schema: &Schema) -> Result<RawTable, DataError> {
    if schema.columns.len() != table.n_columns()
        || schema.columns.iter().zip(&table.column_names).any(|(s, n)| s.name != *n)
    {
        return Err(DataError::SchemaMismatch(format!(
            "schema has {} columns, table has {}",
            schema.columns.len(),
            table.n_columns()
        )));
    }
    let mut rows: Vec<Vec<Cell>> = table
        .rows
        .iter()
        .filter(|r| !r.iter().any(Cell::is_missing))
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Text(s) => Cell::Text(s.trim().to_string()),
                    other => other.clone(),
                })
                .collect()
        })
        .collect();
    if rows.is_empty() {
        return Err(DataError::AllRowsDropped);
    }
    for (c, col) in schema.columns.iter().enumerate() {
        if col.kind == ColumnKind::Continuous {
            continue;
        }
        let mut canonical: BTreeMap<String, String> = BTreeMap::new();
        for row in &rows {
            if let Cell::Text(s) = &row[c] {
                let key = category_key(&row[c]);
                canonical
                    .entry(key)
                    .and_modify(|best| {
                        if s < best {
                            *best = s.clone();
                        }
                    })
                    .or_insert_with(|| s.clone());
            }
        }
        for row in &mut rows {
            if let Cell::Text(_) = &row[c] {
                let key = category_key(&row[c]);
                row[c] = Cell::Text(canonical[&key].clone());
            }
        }
    }
    RawTable::new(table.column_names.clone(), rows, table.source_path.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(values: &[&str]) -> RawTable {
        let rows: Vec<&[&str]> = values.iter().map(std::slice::from_ref).collect();
        RawTable::from_strings(&["v"], &rows).unwrap()
    }

    #[test]
    fn continuous_above_threshold() {
        let vals: Vec<String> = (0..21).map(|i| format!("{}.5", i + 1)).collect();
        let refs: Vec<&str> = vals.iter().map(String::as_str).collect();
        let s = infer_schema(&single(&refs), 20).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Continuous);
        assert_eq!(s.columns[0].distinct_count, 21);
    }

    #[test]
    fn binary_and_categorical() {
        let s = infer_schema(&single(&["yes", "no", "yes"]), 20).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Binary);
        let s = infer_schema(&single(&["a", "b", "c"]), 20).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Categorical);
        assert_eq!(s.columns[0].distinct_count, 3);
    }

    #[test]
    fn numeric_low_cardinality_is_categorical() {
        let s = infer_schema(&single(&["1", "2", "3", "1"]), 20).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Categorical);
    }

    #[test]
    fn missing_counted() {
        let s = infer_schema(&single(&["1", "NA", "", "2"]), 20).unwrap();
        assert_eq!(s.columns[0].missing_count, 2);
        assert_eq!(s.columns[0].kind, ColumnKind::Binary);
    }

    #[test]
    fn sanitize_drops_missing_rows() {
        let t = RawTable::from_strings(&["a", "b"], &[&["1", "x"], &["2", ""], &["3", "y"]]).unwrap();
        let s = infer_schema(&t, 20).unwrap();
        let clean = sanitize(&t, &s).unwrap();
        assert_eq!(clean.n_rows(), 2);
    }

    #[test]
    fn sanitize_merges_case_and_space_variants() {
        let t = RawTable::new(
            vec!["pet".into()],
            vec![vec![Cell::Text(" Cat".into())], vec![Cell::Text("cat".into())], vec![Cell::Text("dog".into())]],
            "m",
        )
        .unwrap();
        let s = infer_schema(&t, 20).unwrap();
        assert_eq!(s.columns[0].distinct_count, 2);
        let clean = sanitize(&t, &s).unwrap();
        assert_eq!(clean.rows[0][0], clean.rows[1][0]);
        assert_eq!(clean.rows[0][0], Cell::Text("Cat".into()));
    }

    #[test]
    fn sanitize_all_dropped() {
        let t = RawTable::from_strings(&["a", "b"], &[&["1", ""], &["", "2"]]).unwrap();
        let s = infer_schema(&t, 20).unwrap();
        assert!(matches!(sanitize(&t, &s), Err(DataError::AllRowsDropped)));
    }

    #[test]
    fn sanitize_rejects_foreign_schema() {
        let t = RawTable::from_strings(&["a"], &[&["1"]]).unwrap();
        let other = RawTable::from_strings(&["b"], &[&["1"]]).unwrap();
        let s = infer_schema(&other, 20).unwrap();
        assert!(matches!(sanitize(&t, &s), Err(DataError::SchemaMismatch(_))));
    }
}
