//! Configuration, orchestration and persistence for the `gibbs-core`
//! experiments.
//!
//! A run resolves an [`ExperimentConfig`], computes on a worker pool of the
//! configured size and then writes every artifact, the resolved config and a
//! [`RunManifest`] into one output directory.

pub mod config;
pub mod experiments;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, RawConfig};
pub use output::{Check, Outcome};

/// Environment variable naming the root under which runs without an
/// explicit output directory are placed.
pub const OUTPUT_ROOT_VAR: &str = "GIBBS_LAB_OUT";

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: gibbs_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    Inconclusive,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Inconclusive => 2,
            Status::Error => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub started: String,
    pub finished: String,
    pub status: Status,
    pub exit_code: i32,
    /// False when the run stopped early; the listed files are then partial.
    pub complete: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub config: BTreeMap<String, config::Setting>,
    /// Every other file in the output directory.
    pub files: Vec<FileEntry>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Output directory: `--out`, then `run.output_dir`, then a fresh
/// directory under `$GIBBS_LAB_OUT` or `./results`.
pub fn output_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("results"), PathBuf::from);
    let stamp = Utc::now().format("%Y%m%dT%H%M%S");
    root.join(format!("{}-{}-{stamp}", cfg.kind, &cfg.hash()[..12]))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry, RunError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
    Ok(FileEntry {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: format!("{:x}", Sha256::digest(bytes)),
    })
}

/// Computes `cfg` and writes its outputs into `dir`, which must be empty or
/// absent. Experiment failures are recorded in the manifest rather than
/// returned; only I/O and pool errors are returned.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest, RunError> {
    let io = |source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    if std::fs::read_dir(dir).map_err(io)?.next().is_some() {
        return Err(RunError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::AlreadyExists, "output directory is not empty"),
        });
    }
    let started = now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let mut outcome = Outcome::default();
    let result = pool.install(|| experiments::run(cfg, &mut outcome));

    let mut files = vec![write(dir, RESOLVED_CONFIG, cfg.to_text().as_bytes())?];
    for a in &outcome.artifacts {
        files.push(write(dir, &a.name, &a.bytes())?);
    }
    let (status, error) = match &result {
        Err(e) => (Status::Error, Some(e.to_string())),
        Ok(()) if outcome.all_passed() => (Status::Success, None),
        Ok(()) => (Status::Inconclusive, None),
    };
    let manifest = RunManifest {
        experiment: cfg.kind,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        workers: cfg.workers,
        started,
        finished: now(),
        status,
        exit_code: status.exit_code(),
        complete: result.is_ok(),
        error,
        checks: outcome.checks,
        config: cfg.resolved.clone(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    write(dir, MANIFEST, text.as_bytes())?;
    Ok(manifest)
}

/// Runs `cfg` in memory without touching the file system.
pub fn compute(cfg: &ExperimentConfig) -> Result<Outcome, (RunError, Outcome)> {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => return Err((e.into(), Outcome::default())),
    };
    let mut outcome = Outcome::default();
    match pool.install(|| experiments::run(cfg, &mut outcome)) {
        Ok(()) => Ok(outcome),
        Err(e) => Err((e, outcome)),
    }
}
