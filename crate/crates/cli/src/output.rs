//! Output files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use mesoeig::geometry::ConstraintReport;
use mesoeig::spectral::FieldSample;
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Settings that affect the numbers, after flags and config are merged.
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub config_sha256: Option<String>,
    pub seeds: Vec<u64>,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub constraint: Option<ConstraintReport>,
    pub outputs: Vec<OutputEntry>,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Collects output files for one run and writes the manifest last.
pub struct OutputDir {
    root: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                parameters: BTreeMap::new(),
                config_sha256: None,
                seeds: Vec::new(),
                timestamp: timestamp(),
                constraint: None,
                outputs: Vec::new(),
            },
        })
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    pub fn parameter(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.manifest.parameters.insert(key.to_string(), value);
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.retain(|o| o.name != name);
        self.manifest.outputs.push(OutputEntry {
            name: name.to_string(),
            sha256: crate::config::sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Write the manifest. It lists every other file; it does not list itself.
    pub fn finish(self) -> anyhow::Result<PathBuf> {
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Empty for `None`.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn field_csv(samples: &[FieldSample]) -> Vec<u8> {
    let mut out = BufWriter::new(Vec::with_capacity(samples.len() * 100));
    writeln!(out, "x,y,z,u,region").unwrap();
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(s.point[0]),
            num(s.point[1]),
            num(s.point[2]),
            opt_num(s.value),
            s.region.label()
        )
        .unwrap();
    }
    out.into_inner().unwrap_or_default()
}
