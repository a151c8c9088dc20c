//! Configuration-driven driver for `kgcurve-core`: reads a JSON run
//! configuration, runs one task and writes CSV or JSON artifacts.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod tasks;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{parse_config, RunConfig};

pub const TOOL: &str = "kgcurve";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Solve,
    Scan,
    Bounds,
    Flow,
    Validate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Scan => "scan",
            Task::Bounds => "bounds",
            Task::Flow => "flow",
            Task::Validate => "validate",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Convergence(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("{0}")]
    Compute(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::ValidationFailed(_) => 4,
            CliError::Compute(_) | CliError::Io { .. } => 1,
        }
    }
}

impl From<kgcurve_core::Error> for CliError {
    fn from(e: kgcurve_core::Error) -> Self {
        use kgcurve_core::Error as E;
        match e {
            E::Convergence { .. } => CliError::Convergence(e.to_string()),
            // every other failure traces back to an input the config supplied
            E::Domain(_) | E::Validation(_) | E::FlowPole { .. } => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub task: Task,
    pub config: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub strict: bool,
}

/// Parses the config, runs the task in a dedicated thread pool and returns
/// the path of the written artifact.
pub fn run(inv: &Invocation) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(&inv.config).map_err(|e| CliError::Config(format!("{}: {e}", inv.config.display())))?;
    let (config, warnings) = parse_config(&text, inv.strict)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = inv.threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Compute(format!("thread pool: {e}")))?;
    pool.install(|| run_config(&config, inv.task, &inv.out))
}

/// Runs a validated configuration and writes its artifact into `out`.
pub fn run_config(config: &RunConfig, task: Task, out: &Path) -> Result<PathBuf, CliError> {
    let family = config.family()?;
    config.validate_task(task, &family)?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let header = output::Header::new(config, task);
    match task {
        Task::Solve => tasks::solve(config, &family, &header, out),
        Task::Scan => tasks::scan(config, &family, &header, out),
        Task::Bounds => tasks::bounds(config, &family, &header, out),
        Task::Flow => tasks::flow(config, &family, &header, out),
        Task::Validate => tasks::validate(config, &family, &header, out),
    }
}
