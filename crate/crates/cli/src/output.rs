//! Output files, checksums and the run manifest.

use crate::config::{checksum, Kind, Materialized};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Column-oriented CSV builder with fixed headers.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub kind: Kind,
    pub config_hash: String,
    pub config: Materialized,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
}

/// Files written by one run. Anything written is deleted on drop unless the run
/// is committed, so a failed run leaves no partial outputs behind.
pub struct OutputSet {
    dir: PathBuf,
    stem: String,
    written: Mutex<Vec<(PathBuf, OutputRecord)>>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path, kind: Kind, config_hash: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            stem: format!("{}-{}", kind.name(), &config_hash[..12]),
            written: Mutex::new(Vec::new()),
            committed: false,
        })
    }

    /// `<kind>-<hash12>-s<seed>-<part>.<ext>`.
    pub fn name(&self, seed: u64, part: &str, ext: &str) -> String {
        format!("{}-s{seed}-{part}.{ext}", self.stem)
    }

    pub fn manifest_name(&self) -> String {
        format!("{}-manifest.json", self.stem)
    }

    pub fn write(&self, seed: u64, part: &str, ext: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let name = self.name(seed, part, ext);
        let path = self.dir.join(&name);
        // Register first so a failed write is still cleaned up.
        let record = OutputRecord { file: name, sha256: checksum(bytes), bytes: bytes.len() };
        self.written.lock().unwrap().push((path.clone(), record));
        std::fs::write(&path, bytes)?;
        Ok(path)
    }

    pub fn write_csv(&self, seed: u64, part: &str, table: &Table) -> std::io::Result<PathBuf> {
        self.write(seed, part, "csv", &table.to_bytes())
    }

    pub fn write_json<T: Serialize>(&self, seed: u64, part: &str, value: &T) -> std::io::Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
        bytes.push(b'\n');
        self.write(seed, part, "json", &bytes)
    }

    /// Writes the manifest and keeps every file.
    pub fn commit(mut self, mut manifest: RunManifest) -> std::io::Result<(PathBuf, RunManifest)> {
        let mut records: Vec<OutputRecord> = self.written.lock().unwrap().iter().map(|(_, r)| r.clone()).collect();
        records.sort_by(|a, b| a.file.cmp(&b.file));
        manifest.outputs = records;
        let path = self.dir.join(self.manifest_name());
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        std::fs::write(&path, bytes)?;
        self.committed = true;
        Ok((path, manifest))
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for (path, _) in self.written.lock().unwrap().drain(..) {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn uncommitted_files_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path = {
            let out = OutputSet::new(dir.path(), Kind::Volume, &"ab".repeat(32)).unwrap();
            out.write(3, "report", "json", b"{}").unwrap()
        };
        assert!(!path.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn names_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputSet::new(dir.path(), Kind::SsdTrain, "0123456789abcdef0123").unwrap();
        assert_eq!(out.name(4, "episodes", "csv"), "ssd-train-0123456789ab-s4-episodes.csv");
        assert_eq!(out.manifest_name(), "ssd-train-0123456789ab-manifest.json");
    }
}
