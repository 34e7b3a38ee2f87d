//! Artifact writing and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn display<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(value)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    versions: BTreeMap<&'static str, &'static str>,
    seed: Option<u64>,
    config: &'a serde_json::Value,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
    created_unix: u64,
}

/// Writes artifacts under one directory and records their hashes.
pub struct Output {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
}

impl Output {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
            inputs: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Record a file written by other means.
    pub fn record(&mut self, name: &str) -> anyhow::Result<()> {
        let hash = hash_file(&self.dir.join(name))?;
        self.artifacts.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        self.bytes(name, text.as_bytes())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        let mut s = String::new();
        for r in rows {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        self.text(name, &s)
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.bytes(name, &bytes)
    }

    pub fn add_input(&mut self, label: impl Into<String>, path: &Path) -> anyhow::Result<()> {
        let hash = hash_file(path)?;
        self.inputs.insert(label.into(), hash);
        Ok(())
    }

    pub fn finish<C: Serialize>(self, command: &str, config: &C, seed: Option<u64>) -> anyhow::Result<()> {
        let config = serde_json::to_value(config)?;
        let versions = BTreeMap::from([
            ("alliance-cli", env!("CARGO_PKG_VERSION")),
            ("alliance-core", alliance_core::VERSION),
        ]);
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            command,
            versions,
            seed,
            config: &config,
            inputs: &self.inputs,
            outputs: &self.artifacts,
            created_unix,
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        fs::write(self.dir.join(MANIFEST), s)?;
        Ok(())
    }
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}
