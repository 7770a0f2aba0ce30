//! Job records behind a single append-only JSON-lines journal.
//!
//! Every change appends the full job snapshot; replay keeps the last
//! snapshot per job. A torn final line left by a crash is ignored.

use autotab_core::neural::RunConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
    TimedOut,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed | JobState::TimedOut)
    }

    /// Transitions allowed during normal operation.
    pub fn can_become(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Succeeded | JobState::Failed | JobState::TimedOut)
        )
    }
}

impl std::fmt::Display for JobState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Succeeded => "succeeded",
            JobState::Failed => "failed",
            JobState::TimedOut => "timed_out",
        })
    }
}

/// Failure detail tagged with the pipeline stage that raised it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub dataset_id: String,
    pub config: RunConfig,
    pub state: JobState,
    pub submitted_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<JobFailure>,
    /// Relative to the data root; set only once the job succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<String>,
    /// Number of times a worker picked the job up.
    #[serde(default)]
    pub attempts: u32,
    #[serde(default)]
    pub notified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Start,
    Succeed { report_path: String },
    Fail(JobFailure),
    TimeOut(JobFailure),
}

impl Transition {
    pub fn target(&self) -> JobState {
        match self {
            Transition::Start => JobState::Running,
            Transition::Succeed { .. } => JobState::Succeeded,
            Transition::Fail(_) => JobState::Failed,
            Transition::TimeOut(_) => JobState::TimedOut,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no job with id {0}")]
    UnknownJob(String),
    #[error("job {job_id} cannot go from {from} to {to}")]
    IllegalTransition { job_id: String, from: JobState, to: JobState },
    #[error("job {0} is not terminal")]
    NotTerminal(String),
    #[error("journal: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Entry {
    Job(Job),
    Purge { job_id: String },
}

#[derive(Debug)]
struct Inner {
    jobs: BTreeMap<String, Job>,
    /// Submission order, for listing.
    order: Vec<String>,
    journal: File,
}

#[derive(Debug)]
pub struct JobStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

pub(crate) fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl JobStore {
    /// Opens (or creates) the journal at `path` and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut jobs = BTreeMap::new();
        let mut order = Vec::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match serde_json::from_str::<Entry>(&line) {
                    Ok(Entry::Job(job)) => {
                        if !jobs.contains_key(&job.job_id) {
                            order.push(job.job_id.clone());
                        }
                        jobs.insert(job.job_id.clone(), job);
                    }
                    Ok(Entry::Purge { job_id }) => {
                        jobs.remove(&job_id);
                        order.retain(|id| *id != job_id);
                    }
                    Err(e) => tracing::warn!("skipping unreadable journal line: {e}"),
                }
            }
        }
        let journal = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, inner: Mutex::new(Inner { jobs, order, journal }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn append(inner: &mut Inner, entry: &Entry) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(entry).expect("journal entry serialises");
        line.push('\n');
        inner.journal.write_all(line.as_bytes())?;
        inner.journal.flush()?;
        Ok(())
    }

    /// Records a new queued job.
    pub fn submit(&self, dataset_id: &str, config: RunConfig) -> Result<Job, StoreError> {
        let job = Job {
            job_id: format!("job-{}", uuid::Uuid::new_v4().simple()),
            dataset_id: dataset_id.to_string(),
            config,
            state: JobState::Queued,
            submitted_at: now(),
            started_at: None,
            finished_at: None,
            error: None,
            report_path: None,
            attempts: 0,
            notified: false,
        };
        let mut inner = self.lock();
        Self::append(&mut inner, &Entry::Job(job.clone()))?;
        inner.order.push(job.job_id.clone());
        inner.jobs.insert(job.job_id.clone(), job.clone());
        Ok(job)
    }

    pub fn get(&self, job_id: &str) -> Option<Job> {
        self.lock().jobs.get(job_id).cloned()
    }

    /// All jobs in submission order.
    pub fn list(&self) -> Vec<Job> {
        let inner = self.lock();
        inner.order.iter().filter_map(|id| inner.jobs.get(id).cloned()).collect()
    }

    /// Applies one state change atomically; illegal changes leave the job
    /// untouched.
    pub fn transition(&self, job_id: &str, change: Transition) -> Result<Job, StoreError> {
        let mut inner = self.lock();
        let current = inner.jobs.get(job_id).ok_or_else(|| StoreError::UnknownJob(job_id.to_string()))?;
        let to = change.target();
        if !current.state.can_become(to) {
            return Err(StoreError::IllegalTransition { job_id: job_id.to_string(), from: current.state, to });
        }
        let mut job = current.clone();
        job.state = to;
        match change {
            Transition::Start => {
                job.started_at = Some(now());
                job.attempts += 1;
            }
            Transition::Succeed { report_path } => {
                job.finished_at = Some(now());
                job.report_path = Some(report_path);
            }
            Transition::Fail(e) | Transition::TimeOut(e) => {
                job.finished_at = Some(now());
                job.error = Some(e);
            }
        }
        Self::append(&mut inner, &Entry::Job(job.clone()))?;
        inner.jobs.insert(job_id.to_string(), job.clone());
        Ok(job)
    }

    /// Marks a terminal job as notified. Returns the job the first time
    /// only, so each terminal state is announced once.
    pub fn claim_notification(&self, job_id: &str) -> Result<Option<Job>, StoreError> {
        let mut inner = self.lock();
        let job = inner.jobs.get(job_id).ok_or_else(|| StoreError::UnknownJob(job_id.to_string()))?;
        if !job.state.is_terminal() {
            return Err(StoreError::NotTerminal(job_id.to_string()));
        }
        if job.notified {
            return Ok(None);
        }
        let mut job = job.clone();
        job.notified = true;
        Self::append(&mut inner, &Entry::Job(job.clone()))?;
        inner.jobs.insert(job_id.to_string(), job.clone());
        Ok(Some(job))
    }

    /// Startup recovery: jobs left queued or running by a previous process
    /// go back to queued. Returns their ids in submission order.
    pub fn recover(&self) -> Result<Vec<String>, StoreError> {
        let mut inner = self.lock();
        let pending: Vec<String> =
            inner.order.iter().filter(|id| matches!(inner.jobs[*id].state, JobState::Queued | JobState::Running)).cloned().collect();
        for id in &pending {
            if inner.jobs[id].state == JobState::Running {
                let mut job = inner.jobs[id].clone();
                job.state = JobState::Queued;
                job.started_at = None;
                Self::append(&mut inner, &Entry::Job(job.clone()))?;
                inner.jobs.insert(id.clone(), job);
            }
        }
        Ok(pending)
    }

    /// Drops a terminal job from the index.
    pub fn purge(&self, job_id: &str) -> Result<Job, StoreError> {
        let mut inner = self.lock();
        let job = inner.jobs.get(job_id).cloned().ok_or_else(|| StoreError::UnknownJob(job_id.to_string()))?;
        if !job.state.is_terminal() {
            return Err(StoreError::NotTerminal(job_id.to_string()));
        }
        Self::append(&mut inner, &Entry::Purge { job_id: job_id.to_string() })?;
        inner.jobs.remove(job_id);
        inner.order.retain(|id| id != job_id);
        Ok(job)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig::from_json(r#"{"task":"unsupervised","dataset_id":"d"}"#).unwrap()
    }

    #[test]
    fn transition_table() {
        use JobState::*;
        let all = [Queued, Running, Succeeded, Failed, TimedOut];
        let legal: Vec<(JobState, JobState)> =
            all.iter().flat_map(|&a| all.iter().map(move |&b| (a, b))).filter(|(a, b)| a.can_become(*b)).collect();
        assert_eq!(legal, vec![(Queued, Running), (Running, Succeeded), (Running, Failed), (Running, TimedOut)]);
    }

    #[test]
    fn replay_restores_last_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jobs.jsonl");
        let id = {
            let store = JobStore::open(&path).unwrap();
            let job = store.submit("d", config()).unwrap();
            store.transition(&job.job_id, Transition::Start).unwrap();
            store.transition(&job.job_id, Transition::Succeed { report_path: "r".into() }).unwrap();
            job.job_id
        };
        let store = JobStore::open(&path).unwrap();
        let job = store.get(&id).unwrap();
        assert_eq!(job.state, JobState::Succeeded);
        assert_eq!(job.report_path.as_deref(), Some("r"));
    }

    #[test]
    fn torn_last_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jobs.jsonl");
        let id = JobStore::open(&path).unwrap().submit("d", config()).unwrap().job_id;
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"event":"job","job_id":"#).unwrap();
        let store = JobStore::open(&path).unwrap();
        assert_eq!(store.list().len(), 1);
        assert_eq!(store.get(&id).unwrap().state, JobState::Queued);
    }

    #[test]
    fn notification_claimed_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = JobStore::open(dir.path().join("j.jsonl")).unwrap();
        let id = store.submit("d", config()).unwrap().job_id;
        assert!(matches!(store.claim_notification(&id), Err(StoreError::NotTerminal(_))));
        store.transition(&id, Transition::Start).unwrap();
        store.transition(&id, Transition::Fail(JobFailure { stage: "encode".into(), message: "x".into() })).unwrap();
        assert!(store.claim_notification(&id).unwrap().is_some());
        assert!(store.claim_notification(&id).unwrap().is_none());
        let reopened = JobStore::open(store.path()).unwrap();
        assert!(reopened.claim_notification(&id).unwrap().is_none());
    }
}
