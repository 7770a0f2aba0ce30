//! Uploaded datasets, one directory per dataset under the data root.

use crate::store::now;
use autotab_core::dataset::{infer_schema, parse_table, read_table, DataError, RawTable, Schema, TableFormat, DEFAULT_CATEGORICAL_THRESHOLD};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

const RECORD_FILE: &str = "record.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: String,
    pub filename: String,
    pub size_bytes: u64,
    pub schema: Schema,
    pub uploaded_at: String,
    /// Stored file, relative to the data root.
    pub path: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no dataset with id {0}")]
    Unknown(String),
    #[error("dataset storage: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
pub struct DatasetStore {
    data_root: PathBuf,
    records: RwLock<BTreeMap<String, DatasetRecord>>,
}

impl DatasetStore {
    pub const DIR: &'static str = "datasets";

    /// Loads every record found under `data_root/datasets`.
    pub fn open(data_root: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let data_root = data_root.as_ref().to_path_buf();
        let dir = data_root.join(Self::DIR);
        std::fs::create_dir_all(&dir)?;
        let mut records = BTreeMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let record_path = entry?.path().join(RECORD_FILE);
            let Ok(text) = std::fs::read_to_string(&record_path) else { continue };
            match serde_json::from_str::<DatasetRecord>(&text) {
                Ok(r) => {
                    records.insert(r.dataset_id.clone(), r);
                }
                Err(e) => tracing::warn!("ignoring {}: {e}", record_path.display()),
            }
        }
        Ok(Self { data_root, records: RwLock::new(records) })
    }

    /// Parses, profiles and stores an upload. Nothing is written when the
    /// file does not parse.
    pub fn create(&self, filename: &str, bytes: &[u8]) -> Result<DatasetRecord, DatasetError> {
        let safe_name = sanitize_filename(filename);
        let format = TableFormat::from_path(Path::new(&safe_name));
        let table = parse_table(bytes, format, &safe_name)?;
        let schema = infer_schema(&table, DEFAULT_CATEGORICAL_THRESHOLD)?;
        let dataset_id = format!("ds-{}", uuid::Uuid::new_v4().simple());
        let ext = match format {
            TableFormat::Csv => "csv",
            TableFormat::Tsv => "tsv",
        };
        let rel = format!("{}/{dataset_id}/data.{ext}", Self::DIR);
        let dir = self.data_root.join(Self::DIR).join(&dataset_id);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(self.data_root.join(&rel), bytes)?;
        let record = DatasetRecord {
            dataset_id: dataset_id.clone(),
            filename: safe_name,
            size_bytes: bytes.len() as u64,
            schema,
            uploaded_at: now(),
            path: rel,
        };
        // record last, so a crash never leaves a record without its data
        let tmp = dir.join("record.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&record).expect("record serialises"))?;
        std::fs::rename(&tmp, dir.join(RECORD_FILE))?;
        self.records.write().unwrap_or_else(|p| p.into_inner()).insert(dataset_id, record.clone());
        Ok(record)
    }

    pub fn get(&self, dataset_id: &str) -> Option<DatasetRecord> {
        self.records.read().unwrap_or_else(|p| p.into_inner()).get(dataset_id).cloned()
    }

    pub fn list(&self) -> Vec<DatasetRecord> {
        self.records.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect()
    }

    pub fn load_table(&self, dataset_id: &str) -> Result<RawTable, DatasetError> {
        let record = self.get(dataset_id).ok_or_else(|| DatasetError::Unknown(dataset_id.to_string()))?;
        Ok(read_table(self.data_root.join(&record.path), None)?)
    }

    /// Deletes a dataset and its files.
    pub fn remove(&self, dataset_id: &str) -> Result<DatasetRecord, DatasetError> {
        let record = self
            .records
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(dataset_id)
            .ok_or_else(|| DatasetError::Unknown(dataset_id.to_string()))?;
        std::fs::remove_dir_all(self.data_root.join(Self::DIR).join(dataset_id))?;
        Ok(record)
    }
}

/// Keeps the final path component and replaces anything unusual.
fn sanitize_filename(name: &str) -> String {
    let base = name.rsplit(['/', '\\']).next().unwrap_or_default();
    let cleaned: String =
        base.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' }).collect();
    if cleaned.trim_matches('.').is_empty() { "upload.csv".into() } else { cleaned }
}
