//! Assembles the run report and its charts from a finished run.

use super::svg::{plot, Panel, PlotArtifact, PlotData, PlotKind, Series};
use crate::explain::Explanation;
use crate::models::Hyperparams;
use crate::neural::{
    roc_points, ClusteringMetrics, DatasetSummary, Metrics, ModelStatus, RunConfig, RunResult,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const REPORT_FILE: &str = "report.json";
pub const PLOTS_DIR: &str = "plots";
pub const LOG_FILE: &str = "run.log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub name: String,
    pub status: ModelStatus,
    pub params: Hyperparams,
    /// Best mean cross-validation score when the model was tuned.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerRow {
    pub name: String,
    pub final_metrics: Metrics,
    pub retrained_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSection {
    pub algorithm: String,
    pub n_clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub noise_points: usize,
    pub metrics: ClusteringMetrics,
    pub k_scores: Vec<(usize, Option<f64>)>,
    pub explained_variance: Vec<f64>,
    pub labels: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotRef {
    pub kind: PlotKind,
    pub path: String,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reproducibility {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub run_id: String,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub preprocessing: Vec<String>,
    pub models: Vec<ModelRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<WinnerRow>,
    pub explanations: Vec<ExplanationEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringSection>,
    pub plots: Vec<PlotRef>,
    /// Warnings from the run and reasons for omitted charts.
    pub notes: Vec<String>,
    pub log_path: String,
    pub reproducibility: Reproducibility,
}

/// A report together with the chart files it references.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub report: Report,
    pub artifacts: Vec<PlotArtifact>,
}

impl RenderedReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serialises") + "\n"
    }

    /// Writes `report.json` and `plots/*.svg` under `dir`; returns the
    /// report path.
    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<PathBuf> {
        let dir = dir.as_ref();
        let plots = dir.join(PLOTS_DIR);
        std::fs::create_dir_all(&plots)?;
        for a in &self.artifacts {
            std::fs::write(plots.join(&a.file_name), &a.svg)?;
        }
        let path = dir.join(REPORT_FILE);
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

fn method_name(e: &Explanation) -> &'static str {
    match e {
        Explanation::Pdp(_) => "pdp",
        Explanation::Shap(_) => "shap",
        Explanation::Lime(_) => "lime",
        Explanation::Counterfactual(_) => "counterfactual",
    }
}

fn payload(e: &Explanation) -> serde_json::Value {
    let mut v = serde_json::to_value(e).expect("explanation serialises");
    if let Some(map) = v.as_object_mut() {
        map.remove("method");
    }
    v
}

struct Charts {
    artifacts: Vec<PlotArtifact>,
    notes: Vec<String>,
}

impl Charts {
    fn add(&mut self, kind: PlotKind, title: &str, caption: String, data: PlotData) {
        let file = format!("{}.svg", kind.name());
        match plot(kind, title, &caption, &file, &data) {
            Ok(a) => self.artifacts.push(a),
            Err(e) => self.notes.push(format!("{} omitted: {e}", kind.name())),
        }
    }
}

fn feature_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("feature {j}"))
}

fn supervised_charts(result: &RunResult, charts: &mut Charts) {
    let names = &result.dataset.feature_names;
    if let Some(w) = &result.winner {
        if let Metrics::Classification(m) = &w.final_metrics {
            let labels = result.dataset.class_labels.clone().unwrap_or_else(|| (0..m.confusion.len()).map(|k| k.to_string()).collect());
            let values = m.confusion.iter().map(|r| r.iter().map(|&c| Some(c as f64)).collect()).collect();
            charts.add(
                PlotKind::ConfusionHeatmap,
                &format!("Confusion matrix: {}", w.name),
                format!("Held-out confusion counts for {} (rows are true classes, columns predicted).", w.name),
                PlotData::Matrix { row_labels: labels.clone(), col_labels: labels, values, symmetric_scale: false },
            );
            let binary = m.confusion.len() == 2;
            match (&w.test_labels, &w.test_scores, m.auc) {
                (Some(t), Some(s), Some(auc)) if binary => {
                    let truth: Vec<bool> = t.iter().map(|&l| l == 1).collect();
                    let panel = Panel {
                        title: String::new(),
                        x_label: "False positive rate".into(),
                        y_label: "True positive rate".into(),
                        series: vec![Series { label: w.name.clone(), points: roc_points(&truth, s) }],
                        diagonal: true,
                    };
                    charts.add(
                        PlotKind::RocCurve,
                        &format!("ROC curve: {}", w.name),
                        format!("Held-out ROC curve for {} (AUC {}).", w.name, super::svg::format_sig(auc)),
                        PlotData::Lines(vec![panel]),
                    );
                }
                _ if !binary => charts.notes.push("roc_curve omitted: the task has more than two classes".into()),
                _ => charts.notes.push("roc_curve omitted: AUC is undefined on the held-out set".into()),
            }
        }
    }

    let shap: Vec<&Vec<f64>> = result
        .explanations
        .iter()
        .filter_map(|r| match &r.explanation {
            Explanation::Shap(s) => Some(&s.attributions),
            _ => None,
        })
        .collect();
    if !shap.is_empty() {
        let p = shap[0].len();
        let mean_abs: Vec<f64> = (0..p).map(|j| shap.iter().map(|a| a[j].abs()).sum::<f64>() / shap.len() as f64).collect();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
        order.truncate(15);
        charts.add(
            PlotKind::ShapBar,
            "Mean |SHAP| by feature",
            format!("Mean absolute Shapley value over {} explained test rows.", shap.len()),
            PlotData::Bars {
                labels: order.iter().map(|&j| feature_name(names, j)).collect(),
                values: order.iter().map(|&j| mean_abs[j]).collect(),
                value_label: "mean |SHAP value|".into(),
            },
        );
    }

    let panels: Vec<Panel> = result
        .explanations
        .iter()
        .filter_map(|r| match &r.explanation {
            Explanation::Pdp(p) => Some(Panel {
                title: feature_name(names, p.feature),
                x_label: feature_name(names, p.feature),
                y_label: "partial dependence".into(),
                series: vec![Series { label: feature_name(names, p.feature), points: p.grid.iter().copied().zip(p.values.iter().copied()).collect() }],
                diagonal: false,
            }),
            _ => None,
        })
        .take(4)
        .collect();
    if !panels.is_empty() {
        let features: Vec<&str> = panels.iter().map(|p| p.title.as_str()).collect();
        charts.add(
            PlotKind::PdpCurve,
            "Partial dependence",
            format!("Partial dependence of the winning model on {}.", features.join(", ")),
            PlotData::Lines(panels),
        );
    }

    let series: Vec<Series> = result
        .models
        .iter()
        .filter_map(|m| {
            let trace = m.loss_trace.as_ref().filter(|t| !t.is_empty())?;
            Some(Series { label: m.name.clone(), points: trace.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect() })
        })
        .collect();
    if series.is_empty() {
        charts.notes.push("loss_curve omitted: no model recorded a loss trace".into());
    } else {
        let who: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
        charts.add(
            PlotKind::LossCurve,
            "Training loss",
            format!("Training loss per iteration for {}.", who.join(", ")),
            PlotData::Lines(vec![Panel { title: String::new(), x_label: "iteration".into(), y_label: "loss".into(), series, diagonal: false }]),
        );
    }
}

/// Builds the report and its charts. The output depends only on `result`,
/// so equal runs render byte-identical files.
pub fn render_report(result: &RunResult) -> RenderedReport {
    let mut charts = Charts { artifacts: Vec::new(), notes: result.warnings.clone() };
    let corr = &result.dataset.correlation;
    if corr.features.len() >= 2 {
        charts.add(
            PlotKind::CorrelationHeatmap,
            "Feature correlation",
            format!("Pearson correlation between the {} encoded features.", corr.features.len()),
            PlotData::Matrix { row_labels: corr.features.clone(), col_labels: corr.features.clone(), values: corr.pearson.clone(), symmetric_scale: true },
        );
    } else {
        charts.notes.push("correlation_heatmap omitted: fewer than two features".into());
    }

    let mut clustering = None;
    if result.config.task.is_supervised() {
        supervised_charts(result, &mut charts);
    } else if let Some(u) = &result.unsupervised {
        let coords: Vec<(f64, f64)> = u.projection.coordinates.iter().map(|c| (c[0], c[1])).collect();
        charts.add(
            PlotKind::PcaScatter,
            "PCA projection",
            format!("Rows projected on the first principal components (explained variance {}).", fmt_list(&u.projection.explained_variance)),
            PlotData::Scatter { x_label: "PC1".into(), y_label: "PC2".into(), points: coords.clone(), groups: Vec::new() },
        );
        let names = &result.dataset.feature_names;
        let (points, x_label, y_label) = match &u.projection.feature_view {
            Some(view) => (
                view.iter().map(|c| (c[0], c[1])).collect(),
                feature_name(names, 0),
                if names.len() > 1 { feature_name(names, 1) } else { String::from("(constant)") },
            ),
            None => (coords, "PC1".to_string(), "PC2".to_string()),
        };
        charts.add(
            PlotKind::ClusterScatter,
            &format!("Clusters: {}", u.clustering.algorithm),
            format!("{} clusters found by {}.", u.clustering.n_clusters, u.clustering.algorithm),
            PlotData::Scatter { x_label, y_label, points, groups: u.clustering.labels.clone() },
        );
        let mut sizes = vec![0usize; u.clustering.n_clusters];
        let mut noise = 0;
        for &l in &u.clustering.labels {
            match usize::try_from(l).ok().and_then(|l| sizes.get_mut(l)) {
                Some(s) => *s += 1,
                None => noise += 1,
            }
        }
        clustering = Some(ClusteringSection {
            algorithm: u.clustering.algorithm.to_string(),
            n_clusters: u.clustering.n_clusters,
            cluster_sizes: sizes,
            noise_points: noise,
            metrics: u.metrics.clone(),
            k_scores: u.k_scores.clone(),
            explained_variance: u.projection.explained_variance.clone(),
            labels: u.clustering.labels.clone(),
        });
    }

    let models = result
        .models
        .iter()
        .map(|m| ModelRow {
            name: m.name.clone(),
            status: m.status,
            params: m.spec.hyperparameters.clone(),
            cv_score: m.tuning.as_ref().and_then(|t| t.candidates.iter().filter_map(|c| c.mean).reduce(f64::max)),
            metrics: m.metrics.clone(),
            seconds: m.seconds,
            error: m.error.clone(),
        })
        .collect();
    let explanations = result
        .explanations
        .iter()
        .map(|r| ExplanationEntry {
            method: method_name(&r.explanation).into(),
            row: r.row,
            class_label: r.class_label.clone(),
            note: r.note.clone(),
            payload: payload(&r.explanation),
        })
        .collect();
    let plots = charts
        .artifacts
        .iter()
        .map(|a| PlotRef { kind: a.kind, path: format!("{PLOTS_DIR}/{}", a.file_name), caption: a.caption.clone() })
        .collect();
    let report = Report {
        version: result.version.clone(),
        run_id: result.run_id.clone(),
        config: result.config.clone(),
        dataset: result.dataset.clone(),
        preprocessing: result.preprocessing.clone(),
        models,
        winner: result.winner.as_ref().map(|w| WinnerRow { name: w.name.clone(), final_metrics: w.final_metrics.clone(), retrained_rows: w.retrained_rows }),
        explanations,
        clustering,
        plots,
        notes: charts.notes,
        log_path: LOG_FILE.into(),
        reproducibility: Reproducibility { seed: result.seed, config_hash: result.config_hash.clone(), version: result.version.clone() },
    };
    RenderedReport { report, artifacts: charts.artifacts }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| super::svg::format_sig(*x)).collect::<Vec<_>>().join(", ")
}
