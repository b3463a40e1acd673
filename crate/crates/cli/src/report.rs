//! Experiment reports and byte-stable output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use tab_core::config::Config;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub inputs: Value,
    pub rows: Vec<Value>,
    pub flags: Map<String, Value>,
    pub config_hash: String,
}

/// SHA-256 of the resolved configuration's canonical TOML rendering.
pub fn config_hash(config: &Config) -> String {
    let digest = Sha256::digest(config.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

impl ExperimentReport {
    pub fn new(experiment_id: &str, config: &Config) -> Self {
        Self {
            experiment_id: experiment_id.to_string(),
            inputs: to_value(config),
            rows: Vec::new(),
            flags: Map::new(),
            config_hash: config_hash(config),
        }
    }

    pub fn flag<T: Serialize>(&mut self, name: &str, value: T) {
        self.flags.insert(name.to_string(), to_value(&value));
    }

    pub fn to_json(&self) -> Value {
        let mut provenance = Map::new();
        provenance.insert("config_hash".into(), Value::String(self.config_hash.clone()));
        provenance.insert("toolkit_version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        let mut root = Map::new();
        root.insert("experiment_id".into(), Value::String(self.experiment_id.clone()));
        root.insert("inputs".into(), self.inputs.clone());
        root.insert("rows".into(), Value::Array(self.rows.clone()));
        root.insert("flags".into(), Value::Object(self.flags.clone()));
        root.insert("provenance".into(), Value::Object(provenance));
        Value::Object(root)
    }

    /// Pretty JSON with lexicographically ordered keys and a trailing newline.
    pub fn render(&self) -> String {
        render_json(&self.to_json())
    }
}

pub fn render_json(value: &Value) -> String {
    // serde_json's default map is ordered by key, so output is canonical.
    let mut s = serde_json::to_string_pretty(value).expect("json renders");
    s.push('\n');
    s
}

/// CSV with a header row, LF endings and shortest round-trip floats.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// `dir/stem.ext` → `dir/stem<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}
