//! Stage artifacts and their hash-linked metadata sidecars.
//!
//! Every stage writes `<stage>.meta.json` next to its artifacts: the config
//! hash, the root seed, row counts, the sha256 of each artifact file, and the
//! chain hashes of the upstream stages it consumed. A downstream stage
//! refuses to run when an upstream sidecar is missing, was produced under a
//! different config, or no longer matches the files on disk.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut file =
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMeta {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Row/record counts worth surfacing (users retained, posts read, ...).
    pub counts: BTreeMap<String, u64>,
    /// Artifact file name -> sha256 of its content.
    pub artifacts: BTreeMap<String, String>,
    /// Upstream stage name -> that stage's chain hash at consumption time.
    pub upstream: BTreeMap<String, String>,
}

impl StageMeta {
    pub fn new(stage: &str, config_hash: &str, seed: u64) -> Self {
        StageMeta {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            counts: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            upstream: BTreeMap::new(),
        }
    }

    /// Hash summarizing this stage's identity and outputs; downstream
    /// sidecars record it, which links the stages into a chain.
    pub fn chain_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.stage.as_bytes());
        hasher.update(self.config_hash.as_bytes());
        hasher.update(self.seed.to_le_bytes());
        for (name, hash) in &self.artifacts {
            hasher.update(name.as_bytes());
            hasher.update(hash.as_bytes());
        }
        for (stage, hash) in &self.upstream {
            hasher.update(stage.as_bytes());
            hasher.update(hash.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn record_artifact(&mut self, out_dir: &Path, name: &str) -> Result<()> {
        let hash = hash_file(&out_dir.join(name))?;
        self.artifacts.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn record_upstream(&mut self, upstream: &StageMeta) {
        self.upstream.insert(upstream.stage.clone(), upstream.chain_hash());
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(format!("{}.meta.json", self.stage));
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(&path, json)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    pub fn load(out_dir: &Path, stage: &str) -> Result<Self> {
        let path = out_dir.join(format!("{stage}.meta.json"));
        if !path.exists() {
            bail!("stage '{stage}' has not run yet: run `migrate {stage}` first");
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("corrupt sidecar {}", path.display()))
    }
}

/// Load and verify an upstream stage before consuming its artifacts.
///
/// Fails when the upstream ran under a different config hash or when any of
/// its artifact files changed on disk since it ran.
pub fn require_upstream(out_dir: &Path, config_hash: &str, stage: &str) -> Result<StageMeta> {
    let meta = StageMeta::load(out_dir, stage)?;
    if meta.config_hash != config_hash {
        bail!(
            "stage '{stage}' is stale: it ran under config {} but the current config is {}; \
             rerun `migrate {stage}` (and its downstream stages) first",
            &meta.config_hash[..12],
            &config_hash[..12]
        );
    }
    for (name, recorded) in &meta.artifacts {
        let path = out_dir.join(name);
        let actual = hash_file(&path)
            .with_context(|| format!("stage '{stage}' artifact missing: {name}"))?;
        if &actual != recorded {
            bail!(
                "stage '{stage}' artifact {name} changed on disk since the stage ran; \
                 rerun `migrate {stage}` first"
            );
        }
    }
    Ok(meta)
}

/// Exclusive-writer guard for an output directory, held for the lifetime of
/// one command. A second concurrent command fails fast instead of racing.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create {}", out_dir.display()))?;
        let path = out_dir.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "output directory {} is locked by another command \
                     (remove {} if that command crashed)",
                    out_dir.display(),
                    path.display()
                )
            }
            Err(e) => Err(e).with_context(|| format!("cannot create {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
