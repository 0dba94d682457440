//! Checkpoint directories and training logs.
//!
//! A checkpoint directory holds one `HYDRA1` blob per adapter site plus
//! `manifest.json`:
//!
//! ```json
//! {"format": "hydra-checkpoint-v1", "adapter": "hydra",
//!  "config": {"epochs": "2", ...},
//!  "adapters": [{"layer": "blocks.0.attn.q", "blob": "blocks.0.attn.q.hydra"}]}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::{decode_blob, encode_blob, Adapter, AdapterKind, HydraAdapter, LoraAdapter};
use crate::diffusion::DenoiserParams;
use crate::error::{Error, Result};
use crate::train::RunConfig;

pub const CHECKPOINT_FORMAT: &str = "hydra-checkpoint-v1";
const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub adapter_kind: AdapterKind,
    pub config: BTreeMap<String, String>,
    pub adapters: Vec<(String, Adapter)>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    adapter: String,
    config: BTreeMap<String, String>,
    adapters: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    layer: String,
    blob: String,
}

fn as_hydra(adapter: &Adapter) -> HydraAdapter {
    match adapter {
        Adapter::Lora(l) => HydraAdapter::from_lora(l),
        Adapter::Hydra(h) => h.clone(),
    }
}

impl Checkpoint {
    pub fn from_params(params: &DenoiserParams, config: &RunConfig) -> Self {
        Self {
            adapter_kind: config.train.adapter,
            config: config
                .entries()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            adapters: params
                .adapters()
                .into_iter()
                .map(|(name, a)| (name.to_string(), a.clone()))
                .collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.adapters.len());
        for (layer, adapter) in &self.adapters {
            let blob = format!("{layer}.hydra");
            let path = dir.join(&blob);
            fs::write(&path, encode_blob(&as_hydra(adapter))).map_err(|e| Error::io(&path, e))?;
            entries.push(ManifestEntry {
                layer: layer.clone(),
                blob,
            });
        }
        let manifest = Manifest {
            format: CHECKPOINT_FORMAT.into(),
            adapter: self.adapter_kind.as_str().into(),
            config: self.config.clone(),
            adapters: entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        let path = dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!(
                "unsupported checkpoint format '{}'",
                manifest.format
            )));
        }
        let adapter_kind: AdapterKind = manifest.adapter.parse()?;
        let mut adapters = Vec::with_capacity(manifest.adapters.len());
        for entry in manifest.adapters {
            let blob_path = dir.join(&entry.blob);
            let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
            let hydra = decode_blob(&bytes)?;
            let adapter = match adapter_kind {
                AdapterKind::Hydra => Adapter::Hydra(hydra),
                AdapterKind::Lora => {
                    let HydraAdapter { a, mut heads, alpha, .. } = hydra;
                    if heads.len() != 1 {
                        return Err(Error::Format(format!(
                            "LoRA blob {} has {} heads",
                            entry.blob,
                            heads.len()
                        )));
                    }
                    Adapter::Lora(LoraAdapter::from_parts(a, heads.remove(0), alpha)?)
                }
            };
            adapters.push((entry.layer, adapter));
        }
        Ok(Self {
            adapter_kind,
            config: manifest.config,
            adapters,
        })
    }

    /// `base` with this checkpoint's adapters attached at their layers.
    pub fn apply_to(&self, base: &DenoiserParams) -> Result<DenoiserParams> {
        let mut params = base.without_adapters();
        for (layer, adapter) in &self.adapters {
            let host = params
                .linears_mut()
                .into_iter()
                .find(|l| &l.name == layer)
                .ok_or_else(|| Error::Format(format!("checkpoint layer '{layer}' not in model")))?;
            if host.shape() != adapter.host_shape() {
                return Err(Error::Shape {
                    op: "apply_checkpoint",
                    lhs: host.shape(),
                    rhs: adapter.host_shape(),
                });
            }
            host.adapter = Some(adapter.clone());
        }
        Ok(params)
    }
}

/// One training-log line: `{"step": 1, "loss": 0.123456, "epoch": 1}`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub loss: f64,
    pub epoch: usize,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{{\"step\": {}, \"loss\": {:.6}, \"epoch\": {}}}",
            self.step, self.loss, self.epoch
        )
    }
}

pub fn write_log(path: &Path, records: &[LogRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        writeln!(out, "{}", r.to_line()).expect("write to Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}
