//! Loads a config, runs it and writes its outputs; maps failures to exit codes.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dirac_core::scenario::{self, ScenarioError};
use dirac_core::EnergyReport;

use crate::config::{self, ConfigError, ScenarioConfig};
use crate::output;
use crate::presets;

/// Overrides the directory that relative `output.dir` paths resolve against.
pub const OUTPUT_ROOT_VAR: &str = "DIRACSIM_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INSTABILITY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("instability at step {step}: {reason}")]
    Instability { step: usize, reason: String },
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Instability { .. } => EXIT_INSTABILITY,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<ScenarioError> for RunError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(m) => RunError::Config(ConfigError::Invalid {
                key: "scenario".into(),
                message: m,
            }),
            ScenarioError::Instability { step, reason } => RunError::Instability { step, reason },
        }
    }
}

/// `preset:NAME` or a path to a TOML file.
pub fn load(source: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    match source.strip_prefix("preset:") {
        Some(name) => {
            let p = presets::find(name).ok_or_else(|| ConfigError::Invalid {
                key: "preset".into(),
                message: format!("unknown preset `{name}`"),
            })?;
            config::parse(p.text, overrides)
        }
        None => config::read(Path::new(source), overrides),
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

pub struct Completed {
    pub dir: PathBuf,
    pub report: EnergyReport,
}

pub fn run_config(config: &ScenarioConfig, root: &Path) -> Result<Completed, RunError> {
    let scenario = config.to_scenario()?;
    let report = scenario::run(&scenario)?;
    let dir = root.join(&config.output.dir);
    output::write_outputs(&report, &dir).map_err(|e| RunError::Io {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(Completed { dir, report })
}

pub fn run_source(source: &str, overrides: &[String], root: &Path) -> Result<Completed, RunError> {
    run_config(&load(source, overrides)?, root)
}

/// One sweep entry: the config path and how its run ended.
pub type SweepEntry = (PathBuf, Result<Completed, RunError>);

/// Runs every config matching `pattern` on up to `threads` workers. Results
/// are returned in path order.
pub fn sweep(
    pattern: &str,
    overrides: &[String],
    root: &Path,
    threads: usize,
) -> Result<Vec<SweepEntry>, ConfigError> {
    let bad = |m: String| ConfigError::Invalid {
        key: "sweep".into(),
        message: m,
    };
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| bad(format!("bad pattern: {e}")))?
        .filter_map(Result::ok)
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(bad(format!("no files match `{pattern}`")));
    }
    let mut configs = Vec::new();
    for p in &paths {
        configs.push(config::read(p, overrides).map_err(|e| bad(format!("{}: {e}", p.display())))?);
    }
    for (i, c) in configs.iter().enumerate() {
        if let Some(j) = configs[..i]
            .iter()
            .position(|d| d.output.dir == c.output.dir)
        {
            return Err(bad(format!(
                "{} and {} share output.dir {}",
                paths[j].display(),
                paths[i].display(),
                c.output.dir.display()
            )));
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Completed, RunError>>>> =
        Mutex::new(configs.iter().map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(c) = configs.get(i) else { break };
                let r = run_config(c, root);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("workers joined");
    Ok(paths
        .into_iter()
        .zip(results.into_iter().map(|r| r.expect("every index visited")))
        .collect())
}
