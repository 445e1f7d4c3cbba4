//! Command-line driver for the `descent_lab` library.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser};

use config::{Format, RunConfig, Subcommand};
use output::Manifest;
use run::Status;

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// A run that failed outright.
pub const EXIT_FAILURE: i32 = 1;
/// Configuration or schema error; nothing was written.
pub const EXIT_CONFIG: i32 = 2;
/// Some sweep cells failed.
pub const EXIT_PARTIAL: i32 = 3;
/// Every sweep cell failed.
pub const EXIT_TOTAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "descent-lab",
    version,
    about = "Equilibrium measures, S-curves and soliton oracles for semiclassical NLS"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration (schema v1); defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to all cores for `sweep` and 1 otherwise.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated subset of json,csv,svg.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cmd: Subcommand, args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let src = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            config::parse(&src).map_err(|e| {
                anyhow::Error::new(e).context(format!("invalid config {}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(sub) = cfg.subcommand {
        if sub != cmd {
            anyhow::bail!(
                "config is for `{}` but `{}` was requested",
                sub.name(),
                cmd.name()
            );
        }
    }
    cfg.subcommand = Some(cmd);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(f) = &args.format {
        let mut f = f.clone();
        f.sort();
        f.dedup();
        cfg.formats = f;
    }
    Ok(cfg)
}

/// Runs one subcommand and returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    let cmd = cli.subcommand;
    let cfg = match resolve_config(cmd, &cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_CONFIG;
        }
    };
    let workers = cli.common.workers.unwrap_or_else(|| match cmd {
        Subcommand::Sweep => std::thread::available_parallelism().map_or(1, |n| n.get()),
        _ => 1,
    });
    match execute(cmd, &cfg, workers, &cli.common.out) {
        Ok(Status::Complete) => EXIT_OK,
        Ok(Status::PartialFailure) => EXIT_PARTIAL,
        Ok(Status::TotalFailure) => EXIT_TOTAL,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

/// Runs `cmd` on a pool of `workers` threads and writes the artifacts and
/// manifest into `out`.
pub fn execute(
    cmd: Subcommand,
    cfg: &RunConfig,
    workers: usize,
    out: &std::path::Path,
) -> Result<Status> {
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let started = Instant::now();
    let outcome = pool.install(|| run::execute(cmd, cfg))?;
    let files = outcome.artifacts.select(&cfg.formats);
    let manifest = Manifest {
        tool: "descent-lab",
        tool_version: env!("CARGO_PKG_VERSION"),
        library_version: descent_lab::VERSION,
        schema_version: config::SCHEMA_VERSION,
        subcommand: cmd.name(),
        seed: cfg.seed,
        workers,
        config: serde_json::to_value(cfg)?,
        status: serde_json::to_value(outcome.status)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        files: Vec::new(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    output::write_all(out, &files, manifest)?;
    log::info!("wrote {} files to {}", files.len() + 1, out.display());
    Ok(outcome.status)
}
