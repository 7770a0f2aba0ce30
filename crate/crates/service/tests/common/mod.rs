#![allow(dead_code)]

use autotab_service::{JobState, Service, ServiceConfig};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};
use tower::ServiceExt;

pub const DEMO_CSV: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/demo_classification.csv");

pub fn start(root: &Path, workers: usize) -> Arc<Service> {
    let mut config = ServiceConfig::new(root);
    config.workers = workers;
    config.webhook_backoff = vec![Duration::from_millis(10); 3];
    Service::start(config).unwrap()
}

pub fn multipart(filename: &str, bytes: &[u8]) -> Request<Body> {
    let boundary = "autotab-test-boundary";
    let mut body = format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\nContent-Type: text/csv\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    Request::post("/api/v1/datasets")
        .header("content-type", format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap()
}

pub async fn call(service: &Arc<Service>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = autotab_service::router(Arc::clone(service)).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

pub async fn json(service: &Arc<Service>, req: Request<Body>) -> (StatusCode, serde_json::Value) {
    let (status, body) = call(service, req).await;
    (status, serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null))
}

pub fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

pub fn post_json(uri: &str, body: &str) -> Request<Body> {
    Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
}

pub async fn upload_demo(service: &Arc<Service>) -> String {
    let (status, v) = json(service, multipart("demo.csv", &std::fs::read(DEMO_CSV).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["dataset_id"].as_str().unwrap().to_string()
}

pub fn wait_terminal(service: &Service, job_id: &str, limit: Duration) -> JobState {
    let start = Instant::now();
    loop {
        let state = service.job_state(job_id).expect("job exists");
        if state.is_terminal() {
            return state;
        }
        assert!(start.elapsed() < limit, "job {job_id} still {state} after {limit:?}");
        std::thread::sleep(Duration::from_millis(50));
    }
}

/// A quick classification config on the demo data.
pub fn quick_config(dataset_id: &str, extra: &str) -> String {
    format!(
        r#"{{"task":"classification","dataset_id":"{dataset_id}","target":"churned","models":["logistic_regression","naive_bayes"],"tuning":{{"enabled":false}},"split":{{"seed":11}}{extra}}}"#
    )
}
