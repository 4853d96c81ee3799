use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    stage: &'a str,
    version: &'a str,
    config_sha256: String,
    seed: u64,
    derived_seeds: &'a BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a BTreeMap<String, serde_json::Value>,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
}

/// Writes a stage's outputs into the run directory and records their
/// checksums, along with those of the inputs it read, in
/// `manifest_<stage>.json`.
pub struct StageWriter<'a> {
    stage: &'static str,
    cfg: &'a RunConfig,
    dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    seeds: BTreeMap<String, u64>,
    meta: BTreeMap<String, serde_json::Value>,
}

impl<'a> StageWriter<'a> {
    pub fn new(stage: &'static str, cfg: &'a RunConfig) -> anyhow::Result<Self> {
        let dir = cfg.out_dir.clone();
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            stage,
            cfg,
            dir,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            meta: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Path of an earlier stage's artifact; checksummed if present.
    pub fn input(&mut self, name: &str) -> Option<PathBuf> {
        let p = self.path(name);
        let bytes = std::fs::read(&p).ok()?;
        self.inputs.insert(name.to_string(), sha256_hex(&bytes));
        Some(p)
    }

    pub fn seed(&mut self, label: &str, seed: u64) {
        self.seeds.insert(label.to_string(), seed);
    }

    pub fn meta(&mut self, key: &str, value: impl Serialize) -> anyhow::Result<()> {
        self.meta
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let p = self.path(name);
        std::fs::write(&p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Record a file written directly by a library routine.
    pub fn record(&mut self, name: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        let bytes =
            std::fs::read(&p).with_context(|| format!("cannot read back {}", p.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(self) -> anyhow::Result<PathBuf> {
        let manifest = Manifest {
            stage: self.stage,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: self.cfg.hash(),
            seed: self.cfg.seed,
            derived_seeds: &self.seeds,
            meta: &self.meta,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let p = self.dir.join(format!("manifest_{}.json", self.stage));
        std::fs::write(&p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
        Ok(p)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}
