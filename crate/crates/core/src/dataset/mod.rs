//! Canonical data model: raw tables, schemas and encoded numeric matrices.

mod encode;
mod read;
mod schema;

pub use encode::{encode, Encoded, LabelMap, NumericMatrix, TargetValues, Task};
pub use read::{parse_table, read_table, TableFormat};
pub use schema::{infer_schema, sanitize, ColumnKind, ColumnSchema, Schema, DEFAULT_CATEGORICAL_THRESHOLD};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

/// A single parsed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

/// Tokens treated as a missing cell, compared case-insensitively after trimming.
pub const MISSING_TOKENS: [&str; 6] = ["", "na", "n/a", "nan", "null", "none"];

impl Cell {
    /// Parses one field. Missing tokens become [`Cell::Missing`], finite
    /// numbers become [`Cell::Number`] and anything else is kept as trimmed text.
    pub fn parse(raw: &str) -> Cell {
        let s = raw.trim();
        if is_missing_token(s) {
            return Cell::Missing;
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Number(v),
            _ => Cell::Text(s.to_string()),
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Canonical label used for categorical comparisons.
    pub fn label(&self) -> String {
        match self {
            Cell::Number(v) => format_number(*v),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub(crate) fn is_missing_token(s: &str) -> bool {
    let lower = s.trim().to_ascii_lowercase();
    MISSING_TOKENS.contains(&lower.as_str())
}

pub(crate) fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

/// Parsed tabular input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub source_path: String,
}

impl RawTable {
    /// Builds a table, checking that names are unique and rows rectangular.
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<Cell>>,
        source_path: impl Into<String>,
    ) -> Result<Self, DataError> {
        let column_names: Vec<String> = column_names.into_iter().map(|c| c.trim().to_string()).collect();
        for (i, name) in column_names.iter().enumerate() {
            if column_names[..i].contains(name) {
                return Err(DataError::MalformedInput {
                    line: 1,
                    message: format!("duplicate column name {name:?}"),
                });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != column_names.len() {
                return Err(DataError::MalformedInput {
                    line: i + 2,
                    message: format!("expected {} cells, found {}", column_names.len(), row.len()),
                });
            }
        }
        if column_names.is_empty() || rows.is_empty() {
            return Err(DataError::EmptyTable);
        }
        Ok(Self { column_names, rows, source_path: source_path.into() })
    }

    /// Convenience constructor from string cells, parsed with [`Cell::parse`].
    pub fn from_strings(columns: &[&str], rows: &[&[&str]]) -> Result<Self, DataError> {
        Self::new(
            columns.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|c| Cell::parse(c)).collect()).collect(),
            "<memory>",
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        let name = name.trim();
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r[index])
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("malformed input at line {line}: {message}")]
    MalformedInput { line: usize, message: String },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("every row contains a missing cell")]
    AllRowsDropped,
    #[error("schema does not match table: {0}")]
    SchemaMismatch(String),
    #[error("target column {0:?} not found")]
    TargetNotFound(String),
    #[error("input column {0:?} not found")]
    InputNotFound(String),
    #[error("task {task} cannot use target {target:?} of kind {kind}")]
    TaskKindMismatch { task: String, target: String, kind: ColumnKind },
    #[error("column {column:?} is continuous but holds non-numeric value {value:?}")]
    NonNumericValue { column: String, value: String },
    #[error("no input features selected")]
    NoInputs,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl DataError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            DataError::FileNotFound(_) => "FileNotFound",
            DataError::MalformedInput { .. } => "MalformedInput",
            DataError::EmptyTable => "EmptyTable",
            DataError::AllRowsDropped => "AllRowsDropped",
            DataError::SchemaMismatch(_) => "SchemaMismatch",
            DataError::TargetNotFound(_) => "TargetNotFound",
            DataError::InputNotFound(_) => "InputNotFound",
            DataError::TaskKindMismatch { .. } => "TaskKindMismatch",
            DataError::NonNumericValue { .. } => "NonNumericValue",
            DataError::NoInputs => "NoInputs",
            DataError::Io(_) => "Io",
        }
    }
}
