//! Job service around the autotab pipeline: dataset uploads, queued runs
//! on a worker pool, completion notices and report retrieval over HTTP.

pub mod api;
pub mod datasets;
pub mod notify;
pub mod service;
pub mod store;

pub use api::router;
pub use datasets::{DatasetRecord, DatasetStore};
pub use service::{Service, ServiceConfig};
pub use store::{Job, JobState, JobStore, Transition};
