//! Training orchestration: splitting, evaluation, tuning, the MLP and the
//! end-to-end pipeline.

pub mod config;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod split;
pub mod tuning;

pub use config::{ConfigError, NotifyConfig, NotifyMode, RunConfig};
pub use metrics::{
    classification_metrics, evaluate, regression_metrics, roc_auc, roc_points, ClassificationMetrics, ClusteringMetrics,
    Metrics, RegressionMetrics,
};
pub use pipeline::{
    run_pipeline, DatasetSummary, ExplanationRecord, ModelOutcome, ModelStatus, PipelineError, PipelineOptions, RunResult, StageError,
};
pub use split::{kfold_indices, train_test_split, Split, SplitError, SplitSpec};
pub use tuning::{grid_search, CandidateScore, TuneError, TuneResult};
