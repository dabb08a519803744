//! CSV tables, schema-versioned JSON reports and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Every JSON report is wrapped with its schema version and kind.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub kind: &'a str,
    pub data: &'a T,
}

/// The artifacts of one run, written under a single directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes `rows` with a header taken from the row type's field order.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> CliResult<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|source| CliError::Output { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, data: &T) -> CliResult<()> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            kind,
            data,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(name);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|source| CliError::Output { path, source })
    }
}

/// Inputs, versions, seed, timing and the operations behind every number.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub precision_bits: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub exit_code: i32,
    pub started_unix_seconds: u64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub operations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn write(&self, out: &OutputDir) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        out.write_bytes(MANIFEST_FILE, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        k: usize,
        #[serde(rename = "D*")]
        d: f64,
    }

    #[test]
    fn csv_header_follows_field_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv("t.csv", &[Row { k: 1, d: 0.5 }, Row { k: 2, d: 0.25 }]).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "k,D*\n1,0.5\n2,0.25\n");
        out.json("r.json", "test", &vec![1, 2]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["kind"], "test");
        assert_eq!(out.written(), ["t.csv", "r.json"]);
    }
}
