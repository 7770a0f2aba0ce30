//! Append-only run log, kept in memory and mirrored to a JSON-lines file.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Info,
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    /// RFC 3339, UTC, millisecond precision.
    pub timestamp: String,
    pub run_id: String,
    pub stage: String,
    pub level: LogLevel,
    pub message: String,
}

#[derive(Debug)]
struct State {
    records: Vec<LogRecord>,
    file: Option<File>,
    last: Option<DateTime<Utc>>,
}

/// Thread-safe logger for one run. Writing never fails the caller: a sink
/// error is reported once on stderr and the file mirror is dropped.
#[derive(Debug)]
pub struct RunLogger {
    run_id: String,
    path: Option<PathBuf>,
    state: Mutex<State>,
}

impl RunLogger {
    pub fn in_memory(run_id: impl Into<String>) -> Self {
        Self { run_id: run_id.into(), path: None, state: Mutex::new(State { records: Vec::new(), file: None, last: None }) }
    }

    /// Appends to `path`, creating parent directories as needed.
    pub fn to_file(run_id: impl Into<String>, path: impl AsRef<Path>) -> Self {
        let path = path.as_ref().to_path_buf();
        let file = path
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| OpenOptions::new().create(true).append(true).open(&path));
        let file = match file {
            Ok(f) => Some(f),
            Err(e) => {
                eprintln!("run log {}: {e}; keeping records in memory only", path.display());
                None
            }
        };
        Self { run_id: run_id.into(), path: Some(path), state: Mutex::new(State { records: Vec::new(), file, last: None }) }
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn log(&self, stage: &str, level: LogLevel, message: impl Into<String>) {
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        // clamp so timestamps never run backwards within a run
        let now = Utc::now().max(state.last.unwrap_or(DateTime::<Utc>::MIN_UTC));
        state.last = Some(now);
        let record = LogRecord {
            timestamp: now.to_rfc3339_opts(SecondsFormat::Millis, true),
            run_id: self.run_id.clone(),
            stage: stage.to_string(),
            level,
            message: message.into(),
        };
        if let Some(file) = state.file.as_mut() {
            let line = serde_json::to_string(&record).expect("record serialises");
            if let Err(e) = writeln!(file, "{line}") {
                eprintln!("run log {}: {e}; further records kept in memory only", self.run_id);
                state.file = None;
            }
        }
        state.records.push(record);
    }

    pub fn info(&self, stage: &str, message: impl Into<String>) {
        self.log(stage, LogLevel::Info, message);
    }

    pub fn warn(&self, stage: &str, message: impl Into<String>) {
        self.log(stage, LogLevel::Warn, message);
    }

    pub fn error(&self, stage: &str, message: impl Into<String>) {
        self.log(stage, LogLevel::Error, message);
    }

    pub fn records(&self) -> Vec<LogRecord> {
        self.state.lock().unwrap_or_else(|p| p.into_inner()).records.clone()
    }

    pub fn to_jsonl(&self) -> String {
        self.records().iter().map(|r| serde_json::to_string(r).expect("record serialises") + "\n").collect()
    }
}

/// Reads a JSON-lines log back, skipping lines that do not parse.
pub fn read_log(path: impl AsRef<Path>) -> std::io::Result<Vec<LogRecord>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
}
