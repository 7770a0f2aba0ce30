mod common;

use autotab_service::JobState;
use common::*;
use std::time::Duration;

fn outputs(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![("report.json".to_string(), std::fs::read(dir.join("report.json")).unwrap())];
    let mut plots: Vec<_> = std::fs::read_dir(dir.join("plots")).unwrap().map(|e| e.unwrap().path()).collect();
    plots.sort();
    out.extend(plots.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap())));
    out
}

#[test]
fn interrupted_job_reruns_to_identical_bytes() {
    let root = tempfile::tempdir().unwrap();
    let service = start(root.path(), 1);
    let ds = service.datasets.create("demo.csv", &std::fs::read(DEMO_CSV).unwrap()).unwrap().dataset_id;
    let config = autotab_core::neural::RunConfig::from_json(&quick_config(&ds, "")).unwrap();
    let id = service.submit(config).unwrap().job_id;
    assert_eq!(wait_terminal(&service, &id, Duration::from_secs(120)), JobState::Succeeded);
    service.shutdown();
    let job_dir = service.job_dir(&id);
    let first = outputs(&job_dir);
    drop(service);

    // cut the journal back to the moment the job was running, as if the
    // process died mid-run, and leave a half-written report behind
    let journal = root.path().join("jobs.jsonl");
    let text = std::fs::read_to_string(&journal).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let running = lines.iter().position(|l| l.contains(r#""state":"running""#)).unwrap();
    std::fs::write(&journal, lines[..=running].join("\n") + "\n").unwrap();
    std::fs::write(job_dir.join("report.json"), b"{\"trunc").unwrap();

    let service = start(root.path(), 1);
    assert_eq!(wait_terminal(&service, &id, Duration::from_secs(120)), JobState::Succeeded);
    service.shutdown();
    let job = service.jobs.get(&id).unwrap();
    assert_eq!(job.attempts, 2);
    let second = outputs(&job_dir);
    assert_eq!(first.len(), second.len());
    for ((na, a), (nb, b)) in first.iter().zip(&second) {
        assert_eq!(na, nb);
        assert!(a == b, "{na} differs after rerun");
    }
}

#[test]
fn queued_jobs_survive_restart() {
    let root = tempfile::tempdir().unwrap();
    let service = start(root.path(), 0);
    let ds = service.datasets.create("demo.csv", &std::fs::read(DEMO_CSV).unwrap()).unwrap().dataset_id;
    let config = autotab_core::neural::RunConfig::from_json(&quick_config(&ds, "")).unwrap();
    let id = service.submit(config).unwrap().job_id;
    service.shutdown();
    drop(service);
    let service = start(root.path(), 1);
    assert_eq!(wait_terminal(&service, &id, Duration::from_secs(120)), JobState::Succeeded);
    service.shutdown();
}
