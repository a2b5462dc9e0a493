//! Artifact writing: 17-digit CSV, pretty JSON and per-CSV metadata.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// `v` with 17 significant digits; empty for `None`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Hex SHA-256 of the canonical JSON of the parsed configuration (defaults filled in).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

/// Output directory of one command run.
pub struct Artifacts {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    tolerances: BTreeMap<&'static str, f64>,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &'static str, config: &ExperimentConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(e, &format!("cannot create {}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), command, hash: config_hash(config), tolerances: BTreeMap::new() })
    }

    pub fn tolerance(&mut self, name: &'static str, value: f64) {
        self.tolerances.insert(name, value);
    }

    /// Block shared by every metadata file and report.
    pub fn meta(&self) -> Value {
        serde_json::json!({
            "command": self.command,
            "config_sha256": self.hash,
            "versions": { "movwave": movwave::VERSION, "movwave-cli": env!("CARGO_PKG_VERSION") },
            "tolerances": self.tolerances,
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(e, &format!("cannot write {}", path.display())))?;
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json`.
    pub fn csv<I>(&mut self, stem: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::config(format!("cannot format {stem}.csv: {e}"));
        w.write_record(header).map_err(fail)?;
        let mut count = 0usize;
        for r in rows {
            w.write_record(&r).map_err(fail)?;
            count += 1;
        }
        let bytes = w.into_inner().map_err(|e| CliError::config(format!("cannot format {stem}.csv: {e}")))?;
        self.write(&format!("{stem}.csv"), &bytes)?;
        let mut meta = self.meta();
        meta["artifact"] = Value::from(format!("{stem}.csv"));
        meta["columns"] = Value::from(header.to_vec());
        meta["rows"] = Value::from(count);
        self.json(&format!("{stem}.meta.json"), &meta)
    }
}
