//! End-to-end tabular machine learning.
//!
//! The crate is organised the way a run flows through it:
//!
//! 1. [`dataset`] reads CSV/TSV input, infers a [`dataset::Schema`], drops
//!    incomplete rows and encodes everything into a dense numeric matrix.
//! 2. [`preprocess`] fits scalers and oversamplers on training data.
//! 3. [`models`] holds the supervised catalog, [`unsupervised`] the clustering
//!    and projection methods, [`stats`] the correlation measures.
//! 4. [`neural`] splits, tunes, trains, evaluates and orchestrates a full run
//!    via [`neural::run_pipeline`].
//! 5. [`explain`] attributes predictions of the winning model and
//!    [`visual`] renders the JSON report, SVG plots and the run log.

pub mod dataset;
pub mod explain;
pub mod linalg;
pub mod models;
pub mod neural;
pub mod preprocess;
pub mod seed;
pub mod stats;
pub mod unsupervised;
pub mod visual;

pub use dataset::{ColumnKind, LabelMap, NumericMatrix, RawTable, Schema, Task};
pub use models::{Algorithm, FittedModel, ModelSpec, Target};
pub use neural::{run_pipeline, RunConfig, RunResult};
pub use visual::{render_report, Report, RunLogger};

/// Version string stamped into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
