use super::{Cell, DataError, RawTable};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }

    /// Guesses from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("tsv") | Some("tab") => TableFormat::Tsv,
            _ => TableFormat::Csv,
        }
    }
}

/// Reads a CSV/TSV file, or a directory of them joined on their first shared column.
pub fn read_table(path: impl AsRef<Path>, format: Option<TableFormat>) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::FileNotFound(path.to_path_buf()));
    }
    if path.is_dir() {
        return read_directory(path, format);
    }
    let bytes = std::fs::read(path)?;
    let format = format.unwrap_or_else(|| TableFormat::from_path(path));
    parse_table(&bytes, format, &path.display().to_string())
}

/// Parses in-memory CSV/TSV bytes. Comment lines (`#`) and blank lines are
/// skipped; short rows are padded with missing cells and trailing empty
/// fields beyond the header width are dropped. Any other width mismatch is
/// reported with its 1-based line number.
pub fn parse_table(bytes: &[u8], format: TableFormat, source: &str) -> Result<RawTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);

    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::MalformedInput {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let Some(names) = header.as_ref() else {
            header = Some(record.iter().map(|f| f.trim().trim_start_matches('\u{feff}').to_string()).collect());
            continue;
        };
        let width = names.len();
        let mut cells: Vec<Cell> = record.iter().map(Cell::parse).collect();
        if cells.len() > width {
            if cells[width..].iter().all(Cell::is_missing) {
                cells.truncate(width);
            } else {
                return Err(DataError::MalformedInput {
                    line,
                    message: format!("expected {width} fields, found {}", record.len()),
                });
            }
        }
        cells.resize(width, Cell::Missing);
        rows.push(cells);
    }
    let Some(names) = header else {
        return Err(DataError::EmptyTable);
    };
    if names.iter().any(|n| n.is_empty()) {
        return Err(DataError::MalformedInput { line: 1, message: "empty column name".into() });
    }
    RawTable::new(names, rows, source)
}

fn read_directory(dir: &Path, format: Option<TableFormat>) -> Result<RawTable, DataError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("csv") | Some("tsv") | Some("tab")
                )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DataError::EmptyTable);
    }
    let mut tables = Vec::with_capacity(files.len());
    for f in &files {
        tables.push(read_table(f, format)?);
    }
    let mut joined = tables.remove(0);
    if tables.is_empty() {
        return Ok(joined);
    }
    let key = joined
        .column_names
        .iter()
        .find(|name| tables.iter().all(|t| t.column_index(name).is_some()))
        .cloned()
        .ok_or_else(|| DataError::MalformedInput {
            line: 1,
            message: "sheets share no common key column".into(),
        })?;
    for (table, path) in tables.iter().zip(files.iter().skip(1)) {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sheet");
        joined = inner_join(&joined, table, &key, stem)?;
    }
    joined.source_path = dir.display().to_string();
    if joined.rows.is_empty() {
        return Err(DataError::EmptyTable);
    }
    Ok(joined)
}

/// Inner join on `key`. Left row order is kept; right matches follow their
/// file order. Colliding right-hand column names are prefixed with `stem.`.
fn inner_join(left: &RawTable, right: &RawTable, key: &str, stem: &str) -> Result<RawTable, DataError> {
    let lk = left.column_index(key).expect("key present in left table");
    let rk = right.column_index(key).expect("key present in right table");
    let mut index: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, row) in right.rows.iter().enumerate() {
        if !row[rk].is_missing() {
            index.entry(row[rk].label()).or_default().push(i);
        }
    }
    let mut names = left.column_names.clone();
    let right_cols: Vec<usize> = (0..right.n_columns()).filter(|&c| c != rk).collect();
    for &c in &right_cols {
        let name = &right.column_names[c];
        if names.contains(name) {
            names.push(format!("{stem}.{name}"));
        } else {
            names.push(name.clone());
        }
    }
    let mut rows = Vec::new();
    for row in &left.rows {
        if row[lk].is_missing() {
            continue;
        }
        if let Some(matches) = index.get(&row[lk].label()) {
            for &m in matches {
                let mut joined = row.clone();
                joined.extend(right_cols.iter().map(|&c| right.rows[m][c].clone()));
                rows.push(joined);
            }
        }
    }
    if rows.is_empty() {
        return Err(DataError::EmptyTable);
    }
    RawTable::new(names, rows, left.source_path.clone())
}
