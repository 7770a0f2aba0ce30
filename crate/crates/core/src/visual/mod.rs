//! Run logs, charts and the run report.

mod log;
mod report;
mod svg;

pub use log::{read_log, LogLevel, LogRecord, RunLogger};
pub use report::{
    render_report, ClusteringSection, ExplanationEntry, ModelRow, PlotRef, RenderedReport, Report, Reproducibility, WinnerRow,
    LOG_FILE, PLOTS_DIR, REPORT_FILE,
};
pub use svg::{format_sig, plot, Panel, PlotArtifact, PlotData, PlotError, PlotKind, Series, HEIGHT, WIDTH};
