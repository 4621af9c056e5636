//! Front end for the experiment suites: config parsing, dispatch, and the
//! run manifest.

pub mod config;
pub mod suites;

use std::fs;
use std::path::{Path, PathBuf};

use faraday_core::Check;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{parse_config, parse_str, ConfigErrors, RunConfig, Suite};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub results: Value,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Every failed check with measured value and threshold, one per line.
    pub fn failure_report(&self) -> String {
        self.failed()
            .map(|c| format!("FAIL {}: measured {:e}, threshold {:e} ({})", c.name, c.value, c.threshold, c.message))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Run the configured suite into `cfg.out` and write `manifest.json` there.
/// A numerical error inside the suite becomes a failed `suite_error` check.
pub fn run(cfg: &RunConfig) -> Result<RunManifest, RunError> {
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let started = now();
    let mut outcome = suites::Outcome::default();
    if let Err(e) = suites::run_suite(cfg, &dir, &mut outcome) {
        outcome.checks.push(Check {
            name: "suite_error".into(),
            value: 1.0,
            threshold: 0.0,
            pass: false,
            message: e.to_string(),
        });
    }
    let mut files = Vec::new();
    for p in &outcome.files {
        let bytes = fs::metadata(p).map_err(io_err(p))?.len();
        let rel = p.strip_prefix(&dir).unwrap_or(p);
        files.push(FileEntry { path: rel.to_string_lossy().into_owned(), bytes });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        started,
        finished: now(),
        pass: outcome.checks.iter().all(|c| c.pass),
        checks: outcome.checks,
        results: Value::Object(outcome.results),
        files,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}
