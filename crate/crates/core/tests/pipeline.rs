use autotab_core::dataset::read_table;
use autotab_core::neural::pipeline::{stage, PipelineOptions};
use autotab_core::neural::{run_pipeline, ModelStatus, RunConfig};
use autotab_core::visual::{render_report, PlotKind, RunLogger};
use std::sync::Arc;

fn demo() -> autotab_core::dataset::RawTable {
    read_table(concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo_classification.csv"), None).unwrap()
}

#[test]
fn demo_classification_run() {
    let config = RunConfig::from_json(r#"{"task":"classification","dataset_id":"demo","target":"churned","split":{"seed":42}}"#).unwrap();
    let log = Arc::new(RunLogger::in_memory("t"));
    let t0 = std::time::Instant::now();
    let options = PipelineOptions { logger: Some(log.clone()), ..PipelineOptions::default() };
    let result = run_pipeline(&config, &demo(), &options).unwrap();
    eprintln!("elapsed {:?}", t0.elapsed());
    assert_eq!(result.models.len(), 7);
    for m in &result.models {
        eprintln!("{} {:?} {:?}", m.name, m.status, m.metrics.as_ref().map(|x| x.primary()));
        assert_eq!(m.status, ModelStatus::Succeeded, "{}: {:?}", m.name, m.error);
    }
    let winner = result.winner.as_ref().unwrap();
    eprintln!("winner {}", winner.name);
    let methods: std::collections::BTreeSet<String> = result
        .explanations
        .iter()
        .map(|e| serde_json::to_value(e).unwrap()["method"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(methods.len(), 4, "{methods:?}");
    let stages: std::collections::BTreeSet<String> = log.records().into_iter().map(|r| r.stage).collect();
    for s in [stage::SANITIZE, stage::PREPROCESS, stage::SELECT_MODELS, stage::TRAIN, stage::RETRAIN, stage::EXPLAIN] {
        assert!(stages.contains(s), "missing stage {s}");
    }
}

fn table(name: &str) -> autotab_core::dataset::RawTable {
    read_table(format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR")), None).unwrap()
}

fn assert_well_formed(svg: &str) {
    let mut reader = quick_xml::Reader::from_str(svg);
    let mut depth = 0i64;
    loop {
        match reader.read_event().expect("well-formed svg") {
            quick_xml::events::Event::Start(_) => depth += 1,
            quick_xml::events::Event::End(_) => depth -= 1,
            quick_xml::events::Event::Eof => break,
            _ => {}
        }
    }
    assert_eq!(depth, 0);
    assert!(svg.contains(r#"viewBox="0 0 800 600""#));
    for bad in ["NaN", "inf"] {
        assert!(!svg.contains(bad), "svg contains {bad}");
    }
}

fn written_files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![("report.json".to_string(), std::fs::read(dir.join("report.json")).unwrap())];
    let mut plots: Vec<_> = std::fs::read_dir(dir.join("plots")).unwrap().map(|e| e.unwrap().path()).collect();
    plots.sort();
    for p in plots {
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
    }
    out
}

#[test]
fn repeated_runs_write_identical_reports() {
    let config = RunConfig::from_json(r#"{"task":"classification","dataset_id":"demo","target":"churned","split":{"seed":7}}"#).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let result = run_pipeline(&config, &demo(), &PipelineOptions::default()).unwrap();
        render_report(&result).write(d.path()).unwrap();
    }
    let (a, b) = (written_files(dirs[0].path()), written_files(dirs[1].path()));
    assert_eq!(a.len(), b.len());
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
    let kinds: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for k in ["confusion_heatmap.svg", "roc_curve.svg", "shap_bar.svg", "pdp_curve.svg", "correlation_heatmap.svg", "loss_curve.svg"] {
        assert!(kinds.contains(&k), "missing {k} in {kinds:?}");
    }
    for (name, bytes) in &a[1..] {
        let svg = std::str::from_utf8(bytes).unwrap();
        assert_well_formed(svg);
        assert!(!name.is_empty());
    }
    let report: serde_json::Value = serde_json::from_slice(&a[0].1).unwrap();
    assert_eq!(report["reproducibility"]["seed"], 7);
    assert!(report["models"].as_array().unwrap().iter().all(|m| m.get("seconds").is_none()));
}

#[test]
fn regression_run() {
    let config = RunConfig::from_json(r#"{"task":"regression","dataset_id":"homes","target":"price_k","split":{"seed":3}}"#).unwrap();
    let result = run_pipeline(&config, &table("demo_regression.csv"), &PipelineOptions::default()).unwrap();
    assert_eq!(result.dataset.rows_dropped, 2);
    for m in &result.models {
        assert_eq!(m.status, ModelStatus::Succeeded, "{}: {:?}", m.name, m.error);
    }
    let winner = result.winner.as_ref().unwrap();
    assert!(winner.final_metrics.primary() > 0.8, "winner r2 {}", winner.final_metrics.primary());
    let rendered = render_report(&result);
    let kinds: Vec<_> = rendered.artifacts.iter().map(|a| a.kind).collect();
    assert!(!kinds.contains(&PlotKind::ConfusionHeatmap) && !kinds.contains(&PlotKind::RocCurve));
    for a in &rendered.artifacts {
        assert_well_formed(&a.svg);
    }
}

#[test]
fn unsupervised_run() {
    let config = RunConfig::from_json(
        r#"{"task":"unsupervised","dataset_id":"demo","inputs":["age","income","monthly_charges"],"split":{"seed":1}}"#,
    )
    .unwrap();
    let result = run_pipeline(&config, &demo(), &PipelineOptions::default()).unwrap();
    assert!(result.winner.is_none());
    let u = result.unsupervised.as_ref().unwrap();
    assert!(u.clustering.n_clusters >= 2);
    assert_eq!(u.projection.coordinates.len(), result.dataset.rows_used);
    let rendered = render_report(&result);
    let kinds: Vec<_> = rendered.artifacts.iter().map(|a| a.kind).collect();
    assert!(kinds.contains(&PlotKind::PcaScatter) && kinds.contains(&PlotKind::ClusterScatter));
    let section = rendered.report.clustering.as_ref().unwrap();
    assert_eq!(section.cluster_sizes.iter().sum::<usize>() + section.noise_points, result.dataset.rows_used);
}

#[test]
fn roc_omitted_for_multiclass() {
    let config = RunConfig::from_json(
        r#"{"task":"classification","dataset_id":"demo","target":"plan","models":["logistic_regression","naive_bayes"],"tuning":{"enabled":false}}"#,
    )
    .unwrap();
    let result = run_pipeline(&config, &demo(), &PipelineOptions::default()).unwrap();
    let rendered = render_report(&result);
    assert!(rendered.artifacts.iter().all(|a| a.kind != PlotKind::RocCurve));
    assert!(rendered.report.notes.iter().any(|n| n.starts_with("roc_curve omitted")));
}
