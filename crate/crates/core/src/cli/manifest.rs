//! Run manifests: every emitted file carries the hash of the parameters and
//! input contents that produced it.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance of one command invocation. The hash covers the tool version,
/// command, seed, parameters and input checksums; paths and the timestamp
/// are recorded but not hashed, so identical runs in different directories
/// share a hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub config: Option<PathBuf>,
    pub inputs: Vec<InputRecord>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub hash: String,
}

#[derive(Serialize)]
struct Hashed<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    params: &'a serde_json::Value,
    inputs: Vec<&'a str>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(
        command: &str,
        seed: u64,
        params: serde_json::Value,
        config: Option<&Path>,
        inputs: &[&Path],
    ) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputRecord {
                    path: p.to_path_buf(),
                    sha256: file_sha256(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hashed = Hashed {
            tool: TOOL,
            version: VERSION,
            command,
            seed,
            params: &params,
            inputs: inputs.iter().map(|i| i.sha256.as_str()).collect(),
        };
        let digest = sha256_hex(&serde_json::to_vec(&hashed).expect("manifest serializes"));
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Ok(RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            params,
            config: config.map(Path::to_path_buf),
            inputs,
            timestamp,
            hash: digest[..16].to_string(),
        })
    }

    /// Writes `<file>.manifest.json` next to `file`.
    pub fn write_sidecar(&self, file: &Path) -> Result<PathBuf> {
        let mut name = file.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// First line of every result CSV.
pub fn manifest_line(hash: &str) -> String {
    format!("# manifest={hash}\n")
}

/// Hash embedded in a result CSV's first line, or a dataset header field.
pub fn embedded_hash(text: &str) -> Option<&str> {
    let first = text.lines().next()?;
    if let Some(h) = first.strip_prefix("# manifest=") {
        return Some(h.trim());
    }
    first
        .split(',')
        .find_map(|f| f.strip_prefix("manifest="))
        .map(str::trim)
}

/// Serializes `rows` as CSV under a manifest line, writes it and its sidecar.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], manifest: &RunManifest) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut text = manifest_line(&manifest.hash).into_bytes();
    text.extend(body);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    manifest.write_sidecar(path)?;
    Ok(())
}
