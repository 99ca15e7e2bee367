//! Run directories: config echo, key=value manifest and snapshot files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::config::{parse_config, RunConfig, FORMAT_VERSION};
use crate::io::snapshot::{list_snapshots, read_snapshot};
use crate::state::SolverState;

pub const CONFIG_FILE: &str = "config.cfg";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Ordered key=value manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(kind: &str) -> Self {
        let mut m = Self::default();
        m.push("program", env!("CARGO_PKG_NAME"));
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("format", FORMAT_VERSION);
        m.push("kind", kind);
        m.push("config", CONFIG_FILE);
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries.iter().cloned().collect()
    }
}

/// Creates `dir` and echoes the config text into it verbatim.
pub fn prepare(dir: &Path, config_text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), config_text)?;
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    fs::write(dir.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::RunDir(dir.to_path_buf(), format!("cannot read {MANIFEST_FILE}: {e}")))?;
    Ok(Manifest::parse(&text))
}

pub fn read_config(dir: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(dir.join(CONFIG_FILE))
        .map_err(|e| Error::RunDir(dir.to_path_buf(), format!("cannot read {CONFIG_FILE}: {e}")))?;
    parse_config(&text)
}

/// All snapshots in `dir`, in index order.
pub fn read_all(dir: &Path) -> Result<Vec<SolverState>> {
    let indices = list_snapshots(dir)?;
    if indices.is_empty() {
        return Err(Error::RunDir(dir.to_path_buf(), "no snapshots".into()));
    }
    indices.into_iter().map(|k| read_snapshot(dir, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::new("run");
        m.push("dt", 0.25);
        let back = Manifest::parse(&m.to_text());
        assert_eq!(back, m);
        assert_eq!(back.get("kind"), Some("run"));
        assert_eq!(back.get("dt"), Some("0.25"));
    }

    #[test]
    fn missing_manifest_names_directory() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_manifest(dir.path()).unwrap_err().to_string();
        assert!(err.contains("manifest.txt"), "{err}");
        assert!(matches!(read_all(dir.path()), Err(Error::RunDir(..))));
    }
}
