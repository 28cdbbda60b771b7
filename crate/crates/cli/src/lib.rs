//! Library half of the `dilemma-lab` command: config loading, dispatch and output handling.

pub mod config;
pub mod output;
pub mod runner;

use config::{Diagnostic, Kind, Materialized, Severity};
use std::path::Path;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DILEMMA_LAB_OUT";

/// Reads, parses and materializes the config at `path` for `kind`.
pub fn load(path: &Path, kind: Kind, seed: Option<u64>) -> Result<Materialized, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Diagnostic::new(Severity::MissingAsset, path.display().to_string(), e.to_string())])?;
    let raw = config::parse(&text).map_err(|d| vec![d])?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    config::materialize(&raw, kind, seed, base)
}
