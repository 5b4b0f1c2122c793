//! `manifest.json`, written into every artifact directory.
//!
//! One entry per command that wrote into the directory, holding the exact
//! inputs (configuration, arguments, seed) and the hash of every file the
//! command produced. Re-running a command replaces its entry.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::card::hex_digest;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mspec_version: String,
    pub seed: u64,
    pub workers: usize,
    pub config_sha256: Option<String>,
    pub config: Option<Value>,
    pub args: Value,
    pub files: BTreeMap<String, FileRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunRecord>,
}

impl RunRecord {
    pub fn new<C: Serialize>(seed: u64, workers: usize, config: Option<&C>, args: Value) -> Self {
        let config = config.map(|c| serde_json::to_value(c).expect("configs serialize"));
        let config_sha256 = config.as_ref().map(|c| hex_digest(&serde_json::to_vec(c).unwrap()));
        Self {
            mspec_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            workers,
            config_sha256,
            config,
            args,
            files: BTreeMap::new(),
        }
    }

    /// Hash `name` inside `dir` into the record.
    pub fn add_file(&mut self, dir: &Path, name: &str) -> CliResult<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(name.into(), FileRecord { sha256: hex_digest(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }
}

impl Manifest {
    pub fn load_or_default(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path,
                line: e.line() as u64,
                detail: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    /// Insert `record` under `command` and rewrite the manifest.
    pub fn record(dir: &Path, command: &str, record: RunRecord) -> CliResult<()> {
        let mut manifest = Self::load_or_default(dir)?;
        manifest.runs.insert(command.into(), record);
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_replaced_per_command() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x0\n1\n").unwrap();
        let mut rec = RunRecord::new::<Value>(3, 1, None, Value::Null);
        rec.add_file(dir.path(), "a.csv").unwrap();
        Manifest::record(dir.path(), "simulate", rec.clone()).unwrap();
        Manifest::record(dir.path(), "simulate", rec.clone()).unwrap();
        Manifest::record(dir.path(), "train", rec).unwrap();
        let m = Manifest::load_or_default(dir.path()).unwrap();
        assert_eq!(m.runs.len(), 2);
        assert_eq!(m.runs["simulate"].files["a.csv"].bytes, 5);
    }
}
