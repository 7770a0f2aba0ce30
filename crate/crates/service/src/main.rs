use autotab_core::dataset::read_table;
use autotab_core::neural::pipeline::PipelineOptions;
use autotab_core::neural::{run_pipeline, RunConfig};
use autotab_core::visual::{render_report, RunLogger, LOG_FILE};
use autotab_service::service::{DEFAULT_MAX_UPLOAD_BYTES, JOBS_DIR, JOURNAL_FILE};
use autotab_service::{router, DatasetStore, JobStore, Service, ServiceConfig};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "autotab", version, about = "No-code tabular machine learning: job service and CLI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start the HTTP job service.
    Serve(ServeArgs),
    /// Run one configuration against a local file and write the report.
    Run(RunArgs),
    /// Delete finished jobs (and optionally unused datasets) from a data root.
    Cleanup(CleanupArgs),
    /// Print the model catalog with default hyperparameters and ranges.
    Catalog,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "AUTOTAB_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "AUTOTAB_HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "AUTOTAB_DATA_ROOT", default_value = "autotab-data")]
    data_root: PathBuf,
    #[arg(long, env = "AUTOTAB_WORKERS", default_value_t = 2)]
    workers: usize,
    #[arg(long, env = "AUTOTAB_MODEL_TIMEOUT_SECONDS", default_value_t = 120)]
    model_timeout_seconds: u64,
    #[arg(long, env = "AUTOTAB_MAX_UPLOAD_BYTES", default_value_t = DEFAULT_MAX_UPLOAD_BYTES)]
    max_upload_bytes: u64,
    /// Built UI bundle to serve at `/`.
    #[arg(long, env = "AUTOTAB_UI_DIR")]
    ui_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// RunConfig JSON file.
    #[arg(long)]
    config: PathBuf,
    /// CSV/TSV file, or a directory of them.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for report.json, plots and the run log.
    #[arg(long, default_value = "autotab-report")]
    out: PathBuf,
    #[arg(long, default_value_t = 120)]
    model_timeout_seconds: u64,
}

#[derive(Args)]
struct CleanupArgs {
    #[arg(long, env = "AUTOTAB_DATA_ROOT", default_value = "autotab-data")]
    data_root: PathBuf,
    /// Only remove jobs that finished at least this many days ago.
    #[arg(long, default_value_t = 30)]
    older_than_days: i64,
    /// Also delete datasets that no remaining job refers to.
    #[arg(long)]
    datasets: bool,
    /// List what would be removed without removing it.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Serve(a) => serve(a),
        Command::Run(a) => run(a),
        Command::Cleanup(a) => cleanup(a),
        Command::Catalog => print_catalog(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type AnyError = Box<dyn std::error::Error + Send + Sync>;

fn print_catalog() -> Result<(), AnyError> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(autotab_core::models::catalog())?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn serve(args: ServeArgs) -> Result<(), AnyError> {
    let mut config = ServiceConfig::new(&args.data_root);
    config.workers = args.workers.max(1);
    config.model_timeout = Duration::from_secs(args.model_timeout_seconds);
    config.max_upload_bytes = args.max_upload_bytes;
    config.ui_dir = args.ui_dir;
    let service = Service::start(config)?;
    let app = router(Arc::clone(&service));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down; waiting for running jobs");
            })
            .await
    })?;
    service.shutdown();
    Ok(())
}

fn run(args: RunArgs) -> Result<(), AnyError> {
    let config = RunConfig::from_json(&std::fs::read_to_string(&args.config)?)?;
    let table = read_table(&args.data, None)?;
    std::fs::create_dir_all(&args.out)?;
    let log_path = args.out.join(LOG_FILE);
    let _ = std::fs::remove_file(&log_path);
    let options = PipelineOptions {
        model_timeout: Duration::from_secs(args.model_timeout_seconds),
        logger: Some(Arc::new(RunLogger::to_file("cli", &log_path))),
        ..PipelineOptions::default()
    };
    let result = run_pipeline(&config, &table, &options)?;
    let path = render_report(&result).write(&args.out)?;
    for m in &result.models {
        let score = m.metrics.as_ref().map_or_else(|| "-".to_string(), |x| format!("{:.4}", x.primary()));
        println!("{:<22} {:<10} {score}", m.name, format!("{:?}", m.status).to_lowercase());
    }
    if let Some(w) = &result.winner {
        println!("winner: {}", w.name);
    }
    println!("report: {}", path.display());
    Ok(())
}

fn cleanup(args: CleanupArgs) -> Result<(), AnyError> {
    let jobs = JobStore::open(args.data_root.join(JOURNAL_FILE))?;
    let cutoff = chrono::Utc::now() - chrono::Duration::days(args.older_than_days);
    let mut removed = 0;
    for job in jobs.list() {
        let finished = job.finished_at.as_deref().and_then(|t| chrono::DateTime::parse_from_rfc3339(t).ok());
        if !job.state.is_terminal() || finished.is_none_or(|t| t > cutoff) {
            continue;
        }
        println!("job {} ({}, finished {})", job.job_id, job.state, job.finished_at.as_deref().unwrap_or("?"));
        if !args.dry_run {
            jobs.purge(&job.job_id)?;
            let dir = args.data_root.join(JOBS_DIR).join(&job.job_id);
            if dir.exists() {
                std::fs::remove_dir_all(dir)?;
            }
        }
        removed += 1;
    }
    if args.datasets {
        let datasets = DatasetStore::open(&args.data_root)?;
        let in_use: std::collections::BTreeSet<String> = jobs.list().into_iter().map(|j| j.dataset_id).collect();
        for record in datasets.list() {
            if in_use.contains(&record.dataset_id) {
                continue;
            }
            println!("dataset {} ({})", record.dataset_id, record.filename);
            if !args.dry_run {
                datasets.remove(&record.dataset_id)?;
            }
            removed += 1;
        }
    }
    println!("{} {removed} entries", if args.dry_run { "would remove" } else { "removed" });
    Ok(())
}
