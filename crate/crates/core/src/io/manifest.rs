//! Experiment manifests: a JSON header line followed by one JSON experiment
//! record per line.
//!
//! ```text
//! {"format":"sfuda-manifest","version":1}
//! {"id":"a","source_path":"src.sfdk","target_path":"tgt.sfdk","method":"sca","method_params":{"init":"mr_weights"},"seed":1}
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Method, MethodParams};

pub const MANIFEST_FORMAT: &str = "sfuda-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestHeader {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRecord {
    pub id: String,
    pub source_path: String,
    pub target_path: String,
    pub method: Method,
    #[serde(default)]
    pub method_params: MethodParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentManifest {
    pub experiments: Vec<ExperimentRecord>,
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(Error::Manifest("manifest lists no experiments".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.experiments {
            if e.id.is_empty() {
                return Err(Error::Manifest("experiment with empty id".into()));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate experiment id '{}'", e.id)));
            }
            if e.source_path.is_empty() || e.target_path.is_empty() {
                return Err(Error::Manifest(format!("experiment '{}' has an empty path", e.id)));
            }
        }
        Ok(())
    }
}

pub fn parse_manifest(text: &str) -> Result<ExperimentManifest> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::Manifest("missing header line".into()))?;
    let header: ManifestHeader = serde_json::from_str(header)
        .map_err(|e| Error::Manifest(format!("line {line}: bad header: {e}")))?;
    if header.format != MANIFEST_FORMAT {
        return Err(Error::Manifest(format!("unknown format '{}'", header.format)));
    }
    if header.version != MANIFEST_VERSION {
        return Err(Error::Manifest(format!("unsupported version {}", header.version)));
    }
    let experiments = lines
        .map(|(line, l)| {
            serde_json::from_str::<ExperimentRecord>(l)
                .map_err(|e| Error::Manifest(format!("line {line}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = ExperimentManifest { experiments };
    manifest.validate()?;
    Ok(manifest)
}

pub fn render_manifest(manifest: &ExperimentManifest) -> String {
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for e in &manifest.experiments {
        out.push_str(&serde_json::to_string(e).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<ExperimentManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn write_manifest(manifest: &ExperimentManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_manifest(manifest)).map_err(|e| Error::io(path, e))
}
