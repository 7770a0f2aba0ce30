mod common;

use autotab_core::visual::{read_log, Report};
use autotab_service::JobState;
use axum::http::StatusCode;
use common::*;
use std::time::Duration;

#[tokio::test]
async fn upload_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 0);
    let (status, v) = json(&service, multipart("two.csv", b"x,label\n1.5,a\n2.5,b\n3.0,a\n")).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["schema"]["columns"].as_array().unwrap().len(), 2);
    let id = v["dataset_id"].as_str().unwrap();
    let (s1, a) = call(&service, get(&format!("/api/v1/datasets/{id}/schema"))).await;
    let (s2, b) = call(&service, get(&format!("/api/v1/datasets/{id}/schema"))).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    let (status, _) = call(&service, get("/api/v1/datasets/ds-missing/schema")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn empty_upload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 0);
    let (status, v) = json(&service, multipart("empty.csv", b"")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "EmptyTable");
}

#[tokio::test]
async fn oversized_upload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 0);
    let mut big = b"a,b\n".to_vec();
    big.resize(101 * 1024 * 1024, b'1');
    let (status, v) = json(&service, multipart("big.csv", &big)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{v}");
    assert!(service.datasets.list().is_empty());
}

#[tokio::test]
async fn job_submission_validation() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 0);
    let ds = upload_demo(&service).await;

    let (status, v) = json(&service, post_json("/api/v1/jobs", &format!(r#"{{"task":"classification","dataset_id":"{ds}"}}"#))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "target");

    let (status, v) = json(&service, post_json("/api/v1/jobs", &format!(r#"{{"task":"classification","dataset_id":"{ds}","target":"nope"}}"#))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "target");

    let (status, _) = json(&service, post_json("/api/v1/jobs", &quick_config("ds-unknown", ""))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (s1, a) = json(&service, post_json("/api/v1/jobs", &quick_config(&ds, ""))).await;
    let (s2, b) = json(&service, post_json("/api/v1/jobs", &quick_config(&ds, ""))).await;
    assert_eq!((s1, s2), (StatusCode::ACCEPTED, StatusCode::ACCEPTED));
    assert_eq!(a["state"], "queued");
    assert_ne!(a["job_id"], b["job_id"]);

    let id = a["job_id"].as_str().unwrap();
    let (status, v) = json(&service, get(&format!("/api/v1/jobs/{id}/report"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "NotReady");
    let (status, _) = call(&service, get("/api/v1/jobs/job-none")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn end_to_end_job() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 2);
    let ds = upload_demo(&service).await;
    let (status, job) = json(&service, post_json("/api/v1/jobs", &quick_config(&ds, r#","notify":{"mode":"file","address":"outbox"}"#))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = job["job_id"].as_str().unwrap().to_string();
    let s = service.clone();
    let id2 = id.clone();
    let state = tokio::task::spawn_blocking(move || wait_terminal(&s, &id2, Duration::from_secs(120))).await.unwrap();
    assert_eq!(state, JobState::Succeeded);

    let (status, body) = call(&service, get(&format!("/api/v1/jobs/{id}/report"))).await;
    assert_eq!(status, StatusCode::OK);
    let report: Report = serde_json::from_slice(&body).expect("report matches schema");
    assert_eq!(report.run_id, id);
    assert_eq!(report.models.len(), 2);
    for p in &report.plots {
        let file = p.path.rsplit('/').next().unwrap();
        let (status, svg) = call(&service, get(&format!("/api/v1/jobs/{id}/plots/{file}"))).await;
        assert_eq!(status, StatusCode::OK);
        assert!(svg.starts_with(b"<?xml"));
    }

    let (status, log) = call(&service, get(&format!("/api/v1/jobs/{id}/log"))).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<serde_json::Value> =
        std::str::from_utf8(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().any(|r| r["stage"] == "train"));

    let outbox: Vec<_> = std::fs::read_dir(dir.path().join("outbox")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(outbox, vec![std::ffi::OsString::from(format!("{id}.json"))]);
    let notice: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("outbox").join(format!("{id}.json"))).unwrap()).unwrap();
    assert_eq!(notice["state"], "succeeded");

    // a second claim is refused, so no duplicate notice can be written
    assert!(service.jobs.claim_notification(&id).unwrap().is_none());
    service.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_job_carries_stage() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 1);
    let (_, v) = json(&service, multipart("one.csv", b"x,y\n1,a\n2,a\n3,a\n4,a\n5,a\n6,a\n")).await;
    let ds = v["dataset_id"].as_str().unwrap();
    let (status, job) =
        json(&service, post_json("/api/v1/jobs", &format!(r#"{{"task":"classification","dataset_id":"{ds}","target":"y"}}"#))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = job["job_id"].as_str().unwrap().to_string();
    let s = service.clone();
    let id2 = id.clone();
    let state = tokio::task::spawn_blocking(move || wait_terminal(&s, &id2, Duration::from_secs(60))).await.unwrap();
    assert_eq!(state, JobState::Failed);
    let (_, v) = json(&service, get(&format!("/api/v1/jobs/{id}"))).await;
    assert!(!v["error"]["stage"].as_str().unwrap().is_empty(), "{v}");
    assert!(v.get("report_path").is_none());
    let (status, _) = call(&service, get(&format!("/api/v1/jobs/{id}/report"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    service.shutdown();
}

#[tokio::test(flavor = "multi_thread")]
async fn webhook_down_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 1);
    let ds = upload_demo(&service).await;
    // nothing listens on a freshly released port
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let extra = format!(r#","notify":{{"mode":"webhook","address":"http://127.0.0.1:{port}/hook"}}"#);
    let (_, job) = json(&service, post_json("/api/v1/jobs", &quick_config(&ds, &extra))).await;
    let id = job["job_id"].as_str().unwrap().to_string();
    let s = service.clone();
    let id2 = id.clone();
    let state = tokio::task::spawn_blocking(move || wait_terminal(&s, &id2, Duration::from_secs(120))).await.unwrap();
    assert_eq!(state, JobState::Succeeded);
    service.shutdown();
    let records = read_log(service.job_dir(&id).join("run.log.jsonl")).unwrap();
    let retries = records.iter().filter(|r| r.stage == "notify" && r.message.contains("retry")).count();
    assert_eq!(retries, 3);
    assert_eq!(service.job_state(&id), Some(JobState::Succeeded));
}

#[tokio::test(flavor = "multi_thread")]
async fn webhook_delivered_to_stub() {
    use axum::routing::post;
    use std::sync::{Arc, Mutex};
    let received = Arc::new(Mutex::new(Vec::<serde_json::Value>::new()));
    let sink = received.clone();
    let stub = axum::Router::new().route(
        "/hook",
        post(move |axum::Json(v): axum::Json<serde_json::Value>| {
            let sink = sink.clone();
            async move {
                sink.lock().unwrap().push(v);
                "ok"
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let port = listener.local_addr().unwrap().port();
    tokio::spawn(async move { axum::serve(listener, stub).await.unwrap() });

    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 1);
    let ds = upload_demo(&service).await;
    let extra = format!(r#","notify":{{"mode":"webhook","address":"http://127.0.0.1:{port}/hook"}}"#);
    let (_, job) = json(&service, post_json("/api/v1/jobs", &quick_config(&ds, &extra))).await;
    let id = job["job_id"].as_str().unwrap().to_string();
    let s = service.clone();
    let id2 = id.clone();
    tokio::task::spawn_blocking(move || wait_terminal(&s, &id2, Duration::from_secs(120))).await.unwrap();
    service.shutdown();
    let got = received.lock().unwrap().clone();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0]["job_id"], id.as_str());
    assert_eq!(got[0]["report"], format!("/api/v1/jobs/{id}/report"));
}

#[test]
fn concurrent_submitters_all_finish() {
    let dir = tempfile::tempdir().unwrap();
    let service = start(dir.path(), 2);
    let record = service.datasets.create("demo.csv", &std::fs::read(DEMO_CSV).unwrap()).unwrap();
    let ids: Vec<String> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..6)
            .map(|_| {
                let service = &service;
                let ds = record.dataset_id.clone();
                scope.spawn(move || {
                    let config = autotab_core::neural::RunConfig::from_json(&quick_config(&ds, "")).unwrap();
                    service.submit(config).unwrap().job_id
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for id in &ids {
        assert_eq!(wait_terminal(&service, id, Duration::from_secs(180)), JobState::Succeeded);
    }
    service.shutdown();
    let reopened = autotab_service::JobStore::open(dir.path().join("jobs.jsonl")).unwrap();
    assert_eq!(reopened.list().len(), ids.len());
    assert!(reopened.list().iter().all(|j| j.state == JobState::Succeeded && j.attempts == 1));
}
