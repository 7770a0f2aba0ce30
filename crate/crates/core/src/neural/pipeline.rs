//! End-to-end run: sanitize, encode, split, preprocess, tune and train the
//! catalog, retrain the winner on every row and explain it.

use super::config::RunConfig;
use super::metrics::{evaluate, ClusteringMetrics, Metrics};
use super::split::{train_test_split, SplitError, SplitSpec};
use super::tuning::{grid_search, TuneError, TuneResult};
use crate::dataset::{encode, infer_schema, sanitize, ColumnSchema, DataError, RawTable, TargetValues, Task, DEFAULT_CATEGORICAL_THRESHOLD};
use crate::explain::{
    counterfactual, lime_explain, pdp, shap_values, CounterfactualOptions, ExplainError, Explanation, LimeOptions,
    PreparedModel, ShapMode,
};
use crate::models::{fit, get_models, tuning_grid, FittedModel, ModelError, ModelSpec, Target};
use crate::preprocess::{FittedPrep, OversampleChoice, PreparePlan, PreprocessError};
use crate::seed;
use crate::stats::{correlation_matrix, summarize, CorrelationMethod, FeatureSummary};
use crate::unsupervised::{cluster, default_eps, fit_pca, silhouette, ClusterAlgorithm, ClusterResult, ClusterSpec, UnsupervisedError};
use crate::visual::RunLogger;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

pub const DEFAULT_MODEL_TIMEOUT: Duration = Duration::from_secs(120);
pub const PDP_FEATURES: usize = 4;
pub const PDP_GRID_POINTS: usize = 20;
pub const SHAP_INSTANCES: usize = 5;
pub const MAX_BACKGROUND_ROWS: usize = 50;
/// Candidate cluster counts when the configuration leaves k open.
pub const K_CANDIDATES: std::ops::RangeInclusive<usize> = 2..=5;

pub mod stage {
    pub const SCHEMA: &str = "schema";
    pub const SANITIZE: &str = "sanitize";
    pub const ENCODE: &str = "encode";
    pub const SPLIT: &str = "split";
    pub const PREPROCESS: &str = "preprocess";
    pub const SELECT_MODELS: &str = "select_models";
    pub const TRAIN: &str = "train";
    pub const RETRAIN: &str = "retrain";
    pub const EXPLAIN: &str = "explain";
    pub const CLUSTER: &str = "cluster";
    pub const PROJECT: &str = "project";
    pub const DONE: &str = "done";
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Defaults to a prefix of the configuration hash.
    pub run_id: Option<String>,
    pub model_timeout: Duration,
    pub logger: Option<Arc<RunLogger>>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { run_id: None, model_timeout: DEFAULT_MODEL_TIMEOUT, logger: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Unsupervised(#[from] UnsupervisedError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("no model finished successfully")]
    NoModelSucceeded,
    #[error("every model exceeded the {0} s time limit")]
    AllModelsTimedOut(u64),
}

/// A failure tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: StageError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub features: Vec<String>,
    /// Pearson coefficients; `None` where a feature is constant.
    pub pearson: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub rows: usize,
    pub rows_used: usize,
    pub rows_dropped: usize,
    pub columns: Vec<ColumnSchema>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub feature_names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_counts: Option<Vec<usize>>,
    pub features: Vec<FeatureSummary>,
    pub correlation: CorrelationSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelStatus {
    Succeeded,
    Failed,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub name: String,
    pub status: ModelStatus,
    /// Tuned specification (catalog defaults when tuning was skipped).
    pub spec: ModelSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuneResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock fit time, recorded only when the config asks for timings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_trace: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerSummary {
    pub name: String,
    pub spec: ModelSpec,
    /// Held-out metrics of the tuned model before retraining.
    pub final_metrics: Metrics,
    pub retrained_rows: usize,
    /// Held-out labels and positive-class scores (binary tasks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_scores: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    #[serde(flatten)]
    pub explanation: Explanation,
    /// Row of the sanitized table being explained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    /// Class whose probability is explained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub explained_variance: Vec<f64>,
    /// First two principal coordinates per row (second is 0 with one feature).
    pub coordinates: Vec<[f64; 2]>,
    /// Preprocessed feature values per row when there are at most two
    /// features (second is 0 with one feature); cluster plots use these.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_view: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsupervisedOutcome {
    pub clustering: ClusterResult,
    /// Silhouette per candidate k when k was chosen automatically.
    pub k_scores: Vec<(usize, Option<f64>)>,
    pub metrics: ClusteringMetrics,
    pub projection: ProjectionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub preprocessing: Vec<String>,
    pub models: Vec<ModelOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<WinnerSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_model: Option<FittedModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_prep: Option<FittedPrep>,
    pub explanations: Vec<ExplanationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsupervised: Option<UnsupervisedOutcome>,
    pub warnings: Vec<String>,
}

struct Run<'a> {
    config: &'a RunConfig,
    log: Arc<RunLogger>,
    seed: u64,
    trace: Vec<String>,
    warnings: Vec<String>,
}

impl Run<'_> {
    fn fail<E: Into<StageError>>(&self, stage: &'static str) -> impl FnOnce(E) -> PipelineError + '_ {
        move |e| {
            let source = e.into();
            self.log.error(stage, source.to_string());
            PipelineError { stage, source }
        }
    }

    fn note(&mut self, stage: &str, message: String) {
        self.log.info(stage, message.clone());
        self.trace.push(message);
    }

    fn warn(&mut self, stage: &str, message: String) {
        self.log.warn(stage, message.clone());
        self.warnings.push(message);
    }
}

/// Executes a configured run on `table`.
pub fn run_pipeline(config: &RunConfig, table: &RawTable, options: &PipelineOptions) -> Result<RunResult, PipelineError> {
    let config_hash = config.hash();
    let run_id = options.run_id.clone().unwrap_or_else(|| format!("run-{}", &config_hash[..12]));
    let log = options.logger.clone().unwrap_or_else(|| Arc::new(RunLogger::in_memory(run_id.clone())));
    let mut run = Run { config, log, seed: config.split.seed, trace: Vec::new(), warnings: Vec::new() };

    let schema = infer_schema(table, DEFAULT_CATEGORICAL_THRESHOLD).map_err(run.fail(stage::SCHEMA))?;
    run.note(stage::SCHEMA, format!("{} rows, {} columns", table.n_rows(), table.n_columns()));
    let clean = sanitize(table, &schema).map_err(run.fail(stage::SANITIZE))?;
    let dropped = table.n_rows() - clean.n_rows();
    run.note(stage::SANITIZE, format!("dropped {dropped} rows with missing cells, {} remain", clean.n_rows()));

    let inputs = (!config.inputs.is_empty()).then_some(config.inputs.as_slice());
    let encoded = encode(&clean, &schema, config.target.as_deref(), config.task, inputs).map_err(run.fail(stage::ENCODE))?;
    let x = encoded.matrix.values.clone();
    let names = encoded.matrix.feature_names.clone();
    run.note(stage::ENCODE, format!("{} encoded features from {} input columns", names.len(), {
        let mut s = encoded.source_columns.clone();
        s.dedup();
        s.len()
    }));

    let target = encoded.labels.as_ref().map(|l| match &l.encoded {
        TargetValues::Classes(c) => Target::Classes { labels: c.clone(), n_classes: l.n_classes() },
        TargetValues::Values(v) => Target::Values(v.clone()),
    });
    let class_labels = encoded.labels.as_ref().filter(|l| !l.classes.is_empty()).map(|l| l.classes.clone());
    let dataset = DatasetSummary {
        dataset_id: config.dataset_id.clone(),
        rows: table.n_rows(),
        rows_used: clean.n_rows(),
        rows_dropped: dropped,
        columns: schema.columns.clone(),
        target: config.target.clone(),
        feature_names: names.clone(),
        class_counts: target.as_ref().and_then(|t| t.labels()).map(|l| {
            let k = class_labels.as_ref().map_or(0, Vec::len);
            let mut counts = vec![0; k];
            for &c in l {
                counts[c] += 1;
            }
            counts
        }),
        class_labels: class_labels.clone(),
        features: summarize(x.view(), &names),
        correlation: CorrelationSummary {
            features: names.clone(),
            pearson: correlation_matrix(x.view(), CorrelationMethod::Pearson),
        },
    };

    let plan = PreparePlan::new(
        config.preprocessing.scaler,
        if config.task == Task::Classification { config.preprocessing.oversample } else { OversampleChoice::None },
        &encoded.feature_kinds,
        seed::derive(run.seed, seed::label_hash("preprocess")),
    );

    let mut result = RunResult {
        run_id,
        version: crate::VERSION.to_string(),
        seed: run.seed,
        config_hash,
        config: config.clone(),
        dataset,
        preprocessing: Vec::new(),
        models: Vec::new(),
        winner: None,
        final_model: None,
        final_prep: None,
        explanations: Vec::new(),
        unsupervised: None,
        warnings: Vec::new(),
    };

    match target {
        Some(target) => supervised(&mut run, &mut result, &plan, x, &names, target, class_labels, options)?,
        None => result.unsupervised = Some(unsupervised(&mut run, &plan, x.view())?),
    }
    run.log.info(stage::DONE, "run finished");
    result.preprocessing = run.trace;
    result.warnings = run.warnings;
    Ok(result)
}

struct TrainContext {
    x_train: Array2<f64>,
    y_train: Target,
    prepared: Array2<f64>,
    prepared_target: Target,
    prep: FittedPrep,
    x_test: Array2<f64>,
    y_test: Target,
    plan: PreparePlan,
    tuning: Option<(usize, u64)>,
    names: Vec<String>,
}

struct Trained {
    spec: ModelSpec,
    tuning: Option<TuneResult>,
    metrics: Metrics,
    model: FittedModel,
    notes: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tune(#[from] TuneError),
}

fn train_one(template: ModelSpec, ctx: &TrainContext) -> Result<Trained, TrainError> {
    let mut notes = Vec::new();
    let grid = tuning_grid(template.algorithm);
    let (spec, tuning) = match ctx.tuning {
        Some((folds, fold_seed)) if !grid.is_empty() => {
            match grid_search(&template, &grid, ctx.x_train.view(), &ctx.y_train, folds, &ctx.plan, fold_seed) {
                Ok(t) => (t.best.clone(), Some(t)),
                Err(TuneError::Folds(e)) => {
                    notes.push(format!("{}: tuning skipped ({e})", template.algorithm));
                    (template, None)
                }
                Err(e) => return Err(e.into()),
            }
        }
        _ => (template, None),
    };
    let model = fit(&spec, ctx.prepared.view(), &ctx.prepared_target, &ctx.names)?;
    let metrics = evaluate(&model, Some(&ctx.prep), ctx.x_test.view(), &ctx.y_test)?;
    Ok(Trained { spec, tuning, metrics, model, notes })
}

#[allow(clippy::too_many_arguments)]
fn supervised(
    run: &mut Run<'_>,
    result: &mut RunResult,
    plan: &PreparePlan,
    x: Array2<f64>,
    names: &[String],
    target: Target,
    class_labels: Option<Vec<String>>,
    options: &PipelineOptions,
) -> Result<(), PipelineError> {
    let config = run.config;
    let split_spec = SplitSpec {
        test_fraction: config.split.test_fraction,
        stratified: config.split.stratified,
        seed: seed::derive(run.seed, seed::label_hash("split")),
    };
    let split = train_test_split(x.nrows(), target.labels(), &split_spec).map_err(run.fail(stage::SPLIT))?;
    for w in &split.warnings {
        run.warn(stage::SPLIT, w.clone());
    }
    run.note(stage::SPLIT, format!("{} training rows, {} test rows", split.train.len(), split.test.len()));

    let x_train = x.select(Axis(0), &split.train);
    let y_train = target.select(&split.train);
    let (prepared, prepared_labels, prep) =
        plan.fit_apply(x_train.view(), y_train.labels()).map_err(run.fail(stage::PREPROCESS))?;
    for n in &prep.notes {
        run.note(stage::PREPROCESS, n.clone());
    }
    run.note(
        stage::PREPROCESS,
        "scaling and oversampling are fitted on training rows only, and again inside every cross-validation fold".into(),
    );
    let prepared_target = match (&y_train, prepared_labels) {
        (Target::Classes { n_classes, .. }, Some(labels)) => Target::Classes { labels, n_classes: *n_classes },
        _ => y_train.clone(),
    };

    let selection = config.models.as_deref();
    let specs = get_models(config.task, prepared.nrows(), x.ncols(), selection, run.seed)
        .map_err(run.fail(stage::SELECT_MODELS))?;
    run.note(
        stage::SELECT_MODELS,
        format!("models: {}", specs.iter().map(|s| s.algorithm.name()).collect::<Vec<_>>().join(", ")),
    );

    let ctx = Arc::new(TrainContext {
        x_train,
        y_train,
        prepared,
        prepared_target,
        prep,
        x_test: x.select(Axis(0), &split.test),
        y_test: target.select(&split.test),
        plan: plan.clone(),
        tuning: config
            .tuning
            .enabled
            .then(|| (config.tuning.folds, seed::derive(run.seed, seed::label_hash("folds")))),
        names: names.to_vec(),
    });

    // each model trains on its own thread so a slow one can be abandoned
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    for (i, spec) in specs.iter().cloned().enumerate() {
        let tx = tx.clone();
        let ctx = Arc::clone(&ctx);
        let log = Arc::clone(&run.log);
        std::thread::spawn(move || {
            let t0 = Instant::now();
            log.info(stage::TRAIN, format!("{} started", spec.algorithm));
            let out = train_one(spec, &ctx);
            let _ = tx.send((i, out, t0.elapsed()));
        });
    }
    drop(tx);
    let mut finished: Vec<Option<(Result<Trained, TrainError>, Duration)>> = (0..specs.len()).map(|_| None).collect();
    let deadline = start + options.model_timeout;
    let mut pending = specs.len();
    while pending > 0 {
        let wait = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(wait) {
            Ok((i, out, elapsed)) => {
                finished[i] = Some((out, elapsed));
                pending -= 1;
            }
            Err(_) => break,
        }
    }

    let timings = config.report.timings;
    let mut fitted: Vec<Option<FittedModel>> = Vec::new();
    for (spec, slot) in specs.into_iter().zip(finished) {
        let name = spec.algorithm.name().to_string();
        let outcome = match slot {
            None => {
                run.warn(stage::TRAIN, format!("{name} exceeded the {}s budget", options.model_timeout.as_secs_f64()));
                fitted.push(None);
                ModelOutcome {
                    name,
                    status: ModelStatus::TimedOut,
                    spec,
                    tuning: None,
                    metrics: None,
                    error: None,
                    seconds: None,
                    loss_trace: None,
                }
            }
            Some((Err(e), elapsed)) => {
                run.warn(stage::TRAIN, format!("{name} failed: {e}"));
                fitted.push(None);
                ModelOutcome {
                    name,
                    status: ModelStatus::Failed,
                    spec,
                    tuning: None,
                    metrics: None,
                    error: Some(e.to_string()),
                    seconds: timings.then_some(elapsed.as_secs_f64()),
                    loss_trace: None,
                }
            }
            Some((Ok(t), elapsed)) => {
                for n in t.notes {
                    run.warn(stage::TRAIN, n);
                }
                run.log.info(stage::TRAIN, format!("{name} test {:.4}", t.metrics.primary()));
                let loss_trace = t.model.loss_trace().map(<[f64]>::to_vec);
                fitted.push(Some(t.model));
                ModelOutcome {
                    name,
                    status: ModelStatus::Succeeded,
                    spec: t.spec,
                    tuning: t.tuning,
                    metrics: Some(t.metrics),
                    error: None,
                    seconds: timings.then_some(elapsed.as_secs_f64()),
                    loss_trace,
                }
            }
        };
        result.models.push(outcome);
    }

    // winner: best primary metric, earliest catalog entry on ties
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in result.models.iter().enumerate() {
        if let Some(metrics) = &m.metrics {
            let score = metrics.primary();
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
    }
    let Some((wi, _)) = best else {
        let err = if result.models.iter().all(|m| m.status == ModelStatus::TimedOut) {
            StageError::AllModelsTimedOut(options.model_timeout.as_secs())
        } else {
            StageError::NoModelSucceeded
        };
        return Err(run.fail(stage::TRAIN)(err));
    };
    let winner = result.models[wi].clone();
    let winner_metrics = winner.metrics.clone().expect("winner has metrics");
    let (test_labels, test_scores) = match (&ctx.y_test, &fitted[wi]) {
        (Target::Classes { labels, n_classes: 2 }, Some(model)) => {
            let z = ctx.prep.transform(ctx.x_test.view()).map_err(run.fail(stage::TRAIN))?;
            let proba = model.predict_proba(z.view()).map_err(run.fail(stage::TRAIN))?;
            (Some(labels.clone()), Some(proba.column(1).to_vec()))
        }
        _ => (None, None),
    };
    run.log.info(stage::TRAIN, format!("winner {}", winner.name));

    let (all_x, all_labels, final_prep) = plan.fit_apply(x.view(), target.labels()).map_err(run.fail(stage::RETRAIN))?;
    let all_target = match (&target, all_labels) {
        (Target::Classes { n_classes, .. }, Some(labels)) => Target::Classes { labels, n_classes: *n_classes },
        _ => target.clone(),
    };
    let final_model = fit(&winner.spec, all_x.view(), &all_target, names).map_err(run.fail(stage::RETRAIN))?;
    run.note(stage::RETRAIN, format!("{} retrained on all {} rows", winner.name, x.nrows()));
    result.winner = Some(WinnerSummary {
        name: winner.name.clone(),
        spec: winner.spec.clone(),
        final_metrics: winner_metrics,
        retrained_rows: x.nrows(),
        test_labels,
        test_scores,
    });

    result.explanations = explain_winner(run, &final_model, &final_prep, &x, &target, &split.train, &split.test, class_labels.as_deref())?;
    result.final_model = Some(final_model);
    result.final_prep = Some(final_prep);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn explain_winner(
    run: &mut Run<'_>,
    model: &FittedModel,
    prep: &FittedPrep,
    x: &Array2<f64>,
    target: &Target,
    train: &[usize],
    test: &[usize],
    class_labels: Option<&[String]>,
) -> Result<Vec<ExplanationRecord>, PipelineError> {
    let fail = |e: ExplainError| {
        run.log.error(stage::EXPLAIN, e.to_string());
        PipelineError { stage: stage::EXPLAIN, source: e.into() }
    };
    let background = x.select(Axis(0), &train[..train.len().min(MAX_BACKGROUND_ROWS)]);
    let x_train = x.select(Axis(0), train);
    let predicted: Option<Vec<usize>> = model.is_classifier().then(|| {
        let z = prep.transform(x.view()).expect("encoded width");
        model.predict_classes(z.view()).expect("classifier")
    });
    // scalar output: positive class for binary, predicted class otherwise
    let class_for = |row: usize| -> usize {
        match (model.n_classes, &predicted) {
            (Some(2), _) => 1,
            (Some(_), Some(p)) => p[row],
            _ => 0,
        }
    };
    let label_of = |c: usize| model.is_classifier().then(|| class_labels.and_then(|l| l.get(c)).cloned()).flatten();
    let mut out = Vec::new();

    let shap_rows = &test[..test.len().min(SHAP_INSTANCES)];
    let mut importance = vec![0.0; x.ncols()];
    for (i, &row) in shap_rows.iter().enumerate() {
        let class = class_for(row);
        let wrapped = PreparedModel { model, prep: Some(prep), class };
        let seed = seed::derive(run.seed, seed::label_hash("shap") ^ i as u64);
        let e = shap_values(&wrapped, &x.row(row).to_vec(), background.view(), ShapMode::Auto, seed).map_err(fail)?;
        for (imp, a) in importance.iter_mut().zip(&e.attributions) {
            *imp += a.abs();
        }
        out.push(ExplanationRecord { explanation: Explanation::Shap(e), row: Some(row), class_label: label_of(class), note: None });
    }
    run.log.info(stage::EXPLAIN, format!("shap on {} test rows", shap_rows.len()));

    let mut ranked: Vec<usize> = (0..x.ncols()).collect();
    ranked.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let pdp_class = match (model.n_classes, target.labels()) {
        (Some(2), _) => 1,
        (Some(k), Some(labels)) => {
            let mut counts = vec![0usize; k];
            for &c in labels {
                counts[c] += 1;
            }
            crate::models::argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
        }
        _ => 0,
    };
    let wrapped = PreparedModel { model, prep: Some(prep), class: pdp_class };
    for &feature in ranked.iter().take(PDP_FEATURES) {
        let e = pdp(&wrapped, background.view(), feature, PDP_GRID_POINTS).map_err(fail)?;
        out.push(ExplanationRecord { explanation: Explanation::Pdp(e), row: None, class_label: label_of(pdp_class), note: None });
    }
    run.log.info(stage::EXPLAIN, format!("partial dependence on {} features", ranked.len().min(PDP_FEATURES)));

    let lime_row = test[0];
    let class = class_for(lime_row);
    let wrapped = PreparedModel { model, prep: Some(prep), class };
    let options = LimeOptions { seed: seed::derive(run.seed, seed::label_hash("lime")), ..LimeOptions::default() };
    let e = lime_explain(&wrapped, &x.row(lime_row).to_vec(), x_train.view(), options).map_err(fail)?;
    out.push(ExplanationRecord { explanation: Explanation::Lime(e), row: Some(lime_row), class_label: label_of(class), note: None });
    run.log.info(stage::EXPLAIN, "lime on one test row");

    if let (Some(k), Some(pred), Some(truth)) = (model.n_classes, &predicted, target.labels()) {
        let (row, desired, note) = match test.iter().find(|&&r| pred[r] != truth[r]) {
            Some(&r) => (r, truth[r], "first misclassified test row; desired class is the true label".to_string()),
            None => {
                let r = test[0];
                (r, (pred[r] + 1) % k, "no misclassified test row; explaining a flip to the next class".to_string())
            }
        };
        let wrapped = PreparedModel { model, prep: Some(prep), class: desired };
        let e = counterfactual(&wrapped, &x.row(row).to_vec(), desired, x.view(), CounterfactualOptions::default())
            .map_err(fail)?;
        run.log.info(stage::EXPLAIN, format!("counterfactual for row {row}: found={}", e.found));
        out.push(ExplanationRecord {
            explanation: Explanation::Counterfactual(e),
            row: Some(row),
            class_label: label_of(desired),
            note: Some(note),
        });
    } else {
        run.log.info(stage::EXPLAIN, "counterfactuals apply to classifiers only");
    }
    Ok(out)
}

fn unsupervised(run: &mut Run<'_>, plan: &PreparePlan, x: ArrayView2<'_, f64>) -> Result<UnsupervisedOutcome, PipelineError> {
    let (z, _, prep) = plan.fit_apply(x, None).map_err(run.fail(stage::PREPROCESS))?;
    for n in &prep.notes {
        run.note(stage::PREPROCESS, n.clone());
    }
    let settings = run.config.clustering.unwrap_or_default();
    let cluster_seed = seed::derive(run.seed, seed::label_hash("cluster"));
    let make_spec = |k: usize| -> Result<ClusterSpec, UnsupervisedError> {
        let mut spec = ClusterSpec::new(settings.algorithm, k, cluster_seed);
        if settings.algorithm == ClusterAlgorithm::Dbscan {
            spec.eps = default_eps(z.view(), spec.min_pts);
        }
        Ok(spec)
    };
    let n = z.nrows();
    let mut k_scores = Vec::new();
    let k = match (settings.k, settings.algorithm) {
        (Some(k), _) => k,
        (None, ClusterAlgorithm::Dbscan) => 1,
        (None, _) => {
            let mut best: Option<(usize, f64)> = None;
            for k in K_CANDIDATES.filter(|&k| k < n) {
                let spec = make_spec(k).map_err(run.fail(stage::CLUSTER))?;
                let r = cluster(z.view(), &spec).map_err(run.fail(stage::CLUSTER))?;
                let s = silhouette(z.view(), &r.labels);
                k_scores.push((k, s));
                if let Some(s) = s {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((k, s));
                    }
                }
            }
            let k = best.map_or(2.min(n), |(k, _)| k);
            run.warn(stage::CLUSTER, format!("no k given; k = {k} picked by the best silhouette over k = 2..=5"));
            k
        }
    };
    let spec = make_spec(k).map_err(run.fail(stage::CLUSTER))?;
    let clustering = cluster(z.view(), &spec).map_err(run.fail(stage::CLUSTER))?;
    run.note(stage::CLUSTER, format!("{} found {} clusters", settings.algorithm, clustering.n_clusters));
    let metrics = ClusteringMetrics { silhouette: silhouette(z.view(), &clustering.labels), inertia: inertia(z.view(), &clustering.labels) };

    let components = 2.min(z.ncols()).min(n);
    let projection = fit_pca(z.view(), components).map_err(run.fail(stage::PROJECT))?;
    let coords = projection.project(z.view());
    let coordinates = coords.rows().into_iter().map(|r| [r[0], if r.len() > 1 { r[1] } else { 0.0 }]).collect();
    run.note(stage::PROJECT, format!("PCA projection onto {components} components"));
    let feature_view = (z.ncols() <= 2)
        .then(|| z.rows().into_iter().map(|r| [r[0], if r.len() > 1 { r[1] } else { 0.0 }]).collect());
    Ok(UnsupervisedOutcome {
        clustering,
        k_scores,
        metrics,
        projection: ProjectionSummary { explained_variance: projection.explained_variance.clone(), coordinates, feature_view },
    })
}

/// Within-cluster sum of squared distances to cluster means; noise excluded.
pub fn inertia(x: ArrayView2<'_, f64>, labels: &[i64]) -> f64 {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (r, &l) in labels.iter().enumerate() {
        if l >= 0 {
            groups.entry(l).or_default().push(r);
        }
    }
    groups
        .values()
        .map(|rows| {
            let members = x.select(Axis(0), rows);
            let mean = members.mean_axis(Axis(0)).expect("non-empty cluster");
            members.rows().into_iter().map(|r| (&r - &mean).mapv(|v| v * v).sum()).sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn inertia_of_two_pairs() {
        let x = array![[0.0], [2.0], [10.0], [12.0], [100.0]];
        assert_eq!(inertia(x.view(), &[0, 0, 1, 1, -1]), 4.0);
    }

    #[test]
    fn unknown_target_fails_in_encode() {
        let table = RawTable::from_strings(&["a", "b"], &[&["1", "x"], &["2", "y"], &["3", "x"], &["4", "y"]]).unwrap();
        let config = RunConfig::from_json(r#"{"task":"classification","dataset_id":"d","target":"nope"}"#).unwrap();
        let err = run_pipeline(&config, &table, &PipelineOptions::default()).unwrap_err();
        assert_eq!(err.stage, stage::ENCODE);
    }
}
