//! Artifact plumbing: atomic writes, content hashing, and the per-subcommand
//! manifest that makes a run auditable. Manifests record file names, content
//! hashes, parameters, and seeds; they never contain timestamps or absolute
//! paths, so two identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read {} for hashing", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", tmp.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).context("serializing artifact")?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Per-subcommand provenance record.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub parameters: serde_json::Value,
    /// file name → sha256 of content, for inputs consumed
    pub inputs: BTreeMap<String, String>,
    /// file name → sha256 of content, for artifacts produced
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Records an input by file name only; absolute locations stay out of
    /// the manifest.
    pub fn record_input(&mut self, path: &Path) -> anyhow::Result<()> {
        let name = file_name(path);
        let hash = sha256_file(path)?;
        self.inputs.insert(name, hash);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> anyhow::Result<()> {
        let name = file_name(path);
        let hash = sha256_file(path)?;
        self.outputs.insert(name, hash);
        Ok(())
    }

    /// Writes `manifest_<command>.json` into the artifact directory.
    pub fn write(&self, out_dir: &Path) -> anyhow::Result<()> {
        let name = format!("manifest_{}.json", self.command.replace('-', "_"));
        write_json(&out_dir.join(name), self)
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.json");
        write_atomic(&path, b"{}").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{}");
        let entries: Vec<_> = std::fs::read_dir(dir.path().join("nested"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn manifest_hashes_match_recomputation() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, b"abc").unwrap();
        let mut manifest = Manifest::new("ingest", serde_json::json!({"seed": 0}));
        manifest.record_input(&input).unwrap();
        assert_eq!(
            manifest.inputs["in.txt"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        manifest.write(dir.path()).unwrap();
        let written = std::fs::read_to_string(dir.path().join("manifest_ingest.json")).unwrap();
        assert!(written.contains("ba7816bf"));
        assert!(!written.contains(&dir.path().display().to_string()));
    }
}
