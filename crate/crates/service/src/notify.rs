//! Completion notices: a JSON file in an outbox directory or a webhook POST.
//!
//! Delivery problems are logged on the job's run log and never change the
//! job's state.

use crate::store::{Job, JobState};
use autotab_core::neural::{NotifyConfig, NotifyMode};
use autotab_core::visual::RunLogger;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

pub const STAGE: &str = "notify";

/// Waits before each webhook retry.
pub const WEBHOOK_BACKOFF: [Duration; 3] = [Duration::from_secs(1), Duration::from_secs(4), Duration::from_secs(9)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    pub job_id: String,
    pub state: JobState,
    /// API path of the report; present only for succeeded jobs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Payload {
    pub fn for_job(job: &Job) -> Self {
        Self {
            job_id: job.job_id.clone(),
            state: job.state,
            report: (job.state == JobState::Succeeded).then(|| format!("/api/v1/jobs/{}/report", job.job_id)),
            error: job.error.as_ref().map(|e| format!("{}: {}", e.stage, e.message)),
        }
    }
}

/// Delivery channel. Implement this to add further channels (e.g. email).
pub trait Notifier: Send + Sync {
    /// Returns whether delivery succeeded; failures are already logged.
    fn deliver(&self, payload: &Payload, log: &RunLogger) -> bool;
}

pub struct FileNotifier<'a> {
    pub outbox: &'a Path,
}

impl Notifier for FileNotifier<'_> {
    fn deliver(&self, payload: &Payload, log: &RunLogger) -> bool {
        let body = serde_json::to_vec_pretty(payload).expect("payload serialises");
        let target = self.outbox.join(format!("{}.json", payload.job_id));
        let tmp = self.outbox.join(format!(".{}.json.tmp", payload.job_id));
        let result = std::fs::create_dir_all(self.outbox)
            .and_then(|_| std::fs::write(&tmp, body))
            .and_then(|_| std::fs::rename(&tmp, &target));
        match result {
            Ok(()) => {
                log.info(STAGE, format!("notification written to {}", target.display()));
                true
            }
            Err(e) => {
                log.error(STAGE, format!("could not write notification to {}: {e}", target.display()));
                false
            }
        }
    }
}

pub struct WebhookNotifier<'a> {
    pub url: &'a str,
    pub backoff: &'a [Duration],
    pub timeout: Duration,
}

impl Notifier for WebhookNotifier<'_> {
    fn deliver(&self, payload: &Payload, log: &RunLogger) -> bool {
        let client = match reqwest::blocking::Client::builder().timeout(self.timeout).build() {
            Ok(c) => c,
            Err(e) => {
                log.error(STAGE, format!("webhook client: {e}"));
                return false;
            }
        };
        let body = serde_json::to_vec(payload).expect("payload serialises");
        let attempts = self.backoff.len() + 1;
        for attempt in 1..=attempts {
            let outcome = client
                .post(self.url)
                .header("content-type", "application/json")
                .body(body.clone())
                .send()
                .map_err(|e| e.to_string())
                .and_then(|r| if r.status().is_success() { Ok(()) } else { Err(format!("status {}", r.status())) });
            match outcome {
                Ok(()) => {
                    log.info(STAGE, format!("webhook delivered on attempt {attempt}"));
                    return true;
                }
                Err(e) if attempt < attempts => {
                    let wait = self.backoff[attempt - 1];
                    log.warn(STAGE, format!("webhook attempt {attempt} failed ({e}); retry {attempt} of {} in {wait:?}", attempts - 1));
                    std::thread::sleep(wait);
                }
                Err(e) => log.error(STAGE, format!("webhook delivery failed after {attempts} attempts: {e}")),
            }
        }
        false
    }
}

/// Sends `job`'s notice through the channel its config names.
pub fn notify(job: &Job, config: &NotifyConfig, backoff: &[Duration], log: &RunLogger) -> bool {
    let payload = Payload::for_job(job);
    match config.mode {
        NotifyMode::File => FileNotifier { outbox: Path::new(&config.address) }.deliver(&payload, log),
        NotifyMode::Webhook => {
            WebhookNotifier { url: &config.address, backoff, timeout: Duration::from_secs(10) }.deliver(&payload, log)
        }
    }
}
