//! Run manifests: enough to reproduce a pipeline run from its inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Hash of a set of ids, independent of their order.
pub fn id_set_hash<'a, I: IntoIterator<Item = &'a str>>(ids: I) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    sha256_hex(ids.join("\n").as_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    /// Input path to sha256 of its contents.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub counts: BTreeMap<String, usize>,
    /// Split name to hash of its problem-id set.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub split_hashes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest { command: command.into(), version: env!("CARGO_PKG_VERSION").into(), ..Default::default() }
    }

    pub fn add_input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Hash every file under `dir`, keyed by path.
    pub fn add_input_dir(&mut self, dir: &Path) -> std::io::Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for path in entries {
            if path.is_dir() {
                self.add_input_dir(&path)?;
            } else {
                self.add_input(&path)?;
            }
        }
        Ok(())
    }
}
