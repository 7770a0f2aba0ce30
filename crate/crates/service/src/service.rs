//! Shared service state and the background worker pool.

use crate::datasets::{DatasetError, DatasetStore};
use crate::notify::{notify, WEBHOOK_BACKOFF};
use crate::store::{Job, JobFailure, JobState, JobStore, StoreError, Transition};
use autotab_core::neural::pipeline::PipelineOptions;
use autotab_core::neural::{run_pipeline, NotifyConfig, NotifyMode, RunConfig, StageError};
use autotab_core::visual::{render_report, RunLogger, LOG_FILE, PLOTS_DIR, REPORT_FILE};
use std::collections::VecDeque;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

pub const DEFAULT_WORKERS: usize = 2;
pub const DEFAULT_MAX_UPLOAD_BYTES: u64 = 100 * 1024 * 1024;
pub const JOBS_DIR: &str = "jobs";
pub const JOURNAL_FILE: &str = "jobs.jsonl";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_root: PathBuf,
    pub workers: usize,
    pub model_timeout: Duration,
    pub max_upload_bytes: u64,
    pub webhook_backoff: Vec<Duration>,
    /// Directory of the built UI, served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        Self {
            data_root: data_root.into(),
            workers: DEFAULT_WORKERS,
            model_timeout: PipelineOptions::default().model_timeout,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            webhook_backoff: WEBHOOK_BACKOFF.to_vec(),
            ui_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Default)]
struct Queue {
    items: Mutex<(VecDeque<String>, bool)>,
    ready: Condvar,
}

impl Queue {
    fn push(&self, id: String) {
        self.items.lock().unwrap_or_else(|p| p.into_inner()).0.push_back(id);
        self.ready.notify_one();
    }

    /// Blocks for the next id; `None` once closed and drained.
    fn pop(&self) -> Option<String> {
        let mut guard = self.items.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            if let Some(id) = guard.0.pop_front() {
                return Some(id);
            }
            if guard.1 {
                return None;
            }
            guard = self.ready.wait(guard).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn close(&self) {
        self.items.lock().unwrap_or_else(|p| p.into_inner()).1 = true;
        self.ready.notify_all();
    }
}

pub struct Service {
    pub config: ServiceConfig,
    pub datasets: DatasetStore,
    pub jobs: JobStore,
    queue: Queue,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Service {
    /// Opens the stores, re-queues unfinished jobs, resends missed notices
    /// and starts the workers.
    pub fn start(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        std::fs::create_dir_all(config.data_root.join(JOBS_DIR)).map_err(DatasetError::from)?;
        let datasets = DatasetStore::open(&config.data_root)?;
        let jobs = JobStore::open(config.data_root.join(JOURNAL_FILE))?;
        let service = Arc::new(Self { config, datasets, jobs, queue: Queue::default(), workers: Mutex::new(Vec::new()) });
        let pending = service.jobs.recover()?;
        if !pending.is_empty() {
            tracing::info!("re-queued {} unfinished jobs", pending.len());
        }
        for id in pending {
            service.queue.push(id);
        }
        for job in service.jobs.list() {
            if job.state.is_terminal() && !job.notified {
                service.send_notice(&job.job_id);
            }
        }
        let handles = (0..service.config.workers)
            .map(|i| {
                let s = Arc::clone(&service);
                std::thread::Builder::new()
                    .name(format!("autotab-worker-{i}"))
                    .spawn(move || {
                        while let Some(id) = s.queue.pop() {
                            s.run_job(&id);
                        }
                    })
                    .expect("spawn worker")
            })
            .collect();
        *service.workers.lock().unwrap_or_else(|p| p.into_inner()) = handles;
        Ok(service)
    }

    /// Stops taking new work and waits for running jobs to finish.
    pub fn shutdown(&self) {
        self.queue.close();
        let handles = std::mem::take(&mut *self.workers.lock().unwrap_or_else(|p| p.into_inner()));
        for h in handles {
            let _ = h.join();
        }
    }

    pub fn job_dir(&self, job_id: &str) -> PathBuf {
        self.config.data_root.join(JOBS_DIR).join(job_id)
    }

    /// Records a job and queues it.
    pub fn submit(&self, config: RunConfig) -> Result<Job, ServiceError> {
        let job = self.jobs.submit(&config.dataset_id.clone(), config)?;
        self.queue.push(job.job_id.clone());
        Ok(job)
    }

    fn run_job(&self, job_id: &str) {
        let job = match self.jobs.transition(job_id, Transition::Start) {
            Ok(j) => j,
            Err(e) => {
                tracing::warn!("skipping {job_id}: {e}");
                return;
            }
        };
        let dir = self.job_dir(job_id);
        // a rerun starts from a clean output directory
        let _ = std::fs::remove_file(dir.join(REPORT_FILE));
        let _ = std::fs::remove_dir_all(dir.join(PLOTS_DIR));
        let log = Arc::new(RunLogger::to_file(job_id, dir.join(LOG_FILE)));
        log.info("job", format!("attempt {} started", job.attempts));

        let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| self.execute(&job, &dir, &log)))
            .unwrap_or_else(|_| Err(Transition::Fail(JobFailure { stage: "internal".into(), message: "worker panicked".into() })));
        let change = match outcome {
            Ok(report_path) => Transition::Succeed { report_path },
            Err(change) => change,
        };
        match &change {
            Transition::Succeed { .. } => log.info("job", "succeeded"),
            Transition::Fail(e) | Transition::TimeOut(e) => log.error("job", format!("{}: {}", e.stage, e.message)),
            Transition::Start => {}
        }
        if let Err(e) = self.jobs.transition(job_id, change) {
            tracing::error!("recording outcome of {job_id}: {e}");
            return;
        }
        self.send_notice(job_id);
    }

    fn execute(&self, job: &Job, dir: &Path, log: &Arc<RunLogger>) -> Result<String, Transition> {
        let fail = |stage: &str, message: String| Transition::Fail(JobFailure { stage: stage.into(), message });
        let table = self.datasets.load_table(&job.dataset_id).map_err(|e| fail("load", e.to_string()))?;
        let options =
            PipelineOptions { run_id: Some(job.job_id.clone()), model_timeout: self.config.model_timeout, logger: Some(Arc::clone(log)) };
        let result = run_pipeline(&job.config, &table, &options).map_err(|e| {
            let detail = JobFailure { stage: e.stage.to_string(), message: e.source.to_string() };
            match e.source {
                StageError::AllModelsTimedOut(_) => Transition::TimeOut(detail),
                _ => Transition::Fail(detail),
            }
        })?;
        render_report(&result).write(dir).map_err(|e| fail("report", e.to_string()))?;
        Ok(format!("{JOBS_DIR}/{}/{REPORT_FILE}", job.job_id))
    }

    fn send_notice(&self, job_id: &str) {
        let Some(job) = self.jobs.get(job_id) else { return };
        let Some(target) = job.config.notify.clone() else { return };
        match self.jobs.claim_notification(job_id) {
            Ok(Some(job)) => {
                let log = RunLogger::to_file(job_id, self.job_dir(job_id).join(LOG_FILE));
                notify(&job, &self.resolve(target), &self.config.webhook_backoff, &log);
            }
            Ok(None) => {}
            Err(e) => tracing::error!("notification for {job_id}: {e}"),
        }
    }

    /// Relative outbox paths live under the data root.
    fn resolve(&self, mut target: NotifyConfig) -> NotifyConfig {
        if target.mode == NotifyMode::File && Path::new(&target.address).is_relative() {
            target.address = self.config.data_root.join(&target.address).to_string_lossy().into_owned();
        }
        target
    }

    pub fn job_state(&self, job_id: &str) -> Option<JobState> {
        self.jobs.get(job_id).map(|j| j.state)
    }
}
