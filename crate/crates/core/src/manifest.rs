//! Experiment manifests: every artifact records the config hash, corpus
//! hash and upstream checkpoint hashes it was built from. Re-running with
//! a changed config never silently overwrites a mismatched checkpoint.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::hash_hex;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentManifest {
    pub kind: String,
    pub config_hash: String,
    pub corpus_hash: String,
    /// Checkpoint lineage: stage name -> file hash of the upstream
    /// checkpoint this artifact was built from.
    pub upstream: BTreeMap<String, String>,
    pub report: Option<String>,
}

impl ExperimentManifest {
    pub fn new(kind: &str, config_hash: &str, corpus_hash: &str) -> Self {
        ExperimentManifest {
            kind: kind.to_string(),
            config_hash: config_hash.to_string(),
            corpus_hash: corpus_hash.to_string(),
            upstream: BTreeMap::new(),
            report: None,
        }
    }

    pub fn with_upstream(mut self, stage: &str, file: &Path) -> Result<Self> {
        self.upstream.insert(stage.to_string(), file_hash(file)?);
        Ok(self)
    }

    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut os = artifact.as_os_str().to_owned();
        os.push(".manifest.json");
        PathBuf::from(os)
    }

    pub fn save(&self, artifact: &Path) -> Result<()> {
        let path = Self::path_for(artifact);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(artifact: &Path) -> Result<Self> {
        let path = Self::path_for(artifact);
        let text = std::fs::read_to_string(&path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hash_hex(&bytes))
}

/// Refuse to overwrite an artifact built from a different configuration
/// unless forced.
pub fn guard_overwrite(artifact: &Path, config_hash: &str, force: bool) -> Result<()> {
    if !artifact.exists() || force {
        return Ok(());
    }
    match ExperimentManifest::load(artifact) {
        Ok(m) if m.config_hash != config_hash => Err(Error::Usage(format!(
            "{} exists with config hash {} (current config is {}); \
             pass --force to overwrite or change the checkpoint directory",
            artifact.display(),
            m.config_hash,
            config_hash
        ))),
        _ => Ok(()),
    }
}
