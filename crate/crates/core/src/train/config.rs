//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known and may appear at most once; anything else is a hard error naming
//! the line.

use std::path::Path;
use std::str::FromStr;

use crate::adapter::{AdapterKind, GateMode};
use crate::diffusion::{make_toy_dataset, DenoiserConfig, LatentBatch, ScheduleKind, DEFAULT_PLACEMENT};
use crate::error::{Error, Result};
use crate::train::AdamWParams;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub rank: usize,
    pub alpha: f64,
    pub heads: usize,
    pub seed: u64,
    pub schedule: ScheduleKind,
    pub timesteps: usize,
    pub placement: Vec<String>,
    pub adapter: AdapterKind,
    pub gate: GateMode,
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2,
            batch_size: 16,
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.99,
            adam_eps: 1e-8,
            weight_decay: 0.01,
            rank: 32,
            alpha: 32.0,
            heads: 4,
            seed: 0,
            schedule: ScheduleKind::Linear,
            timesteps: 1000,
            placement: DEFAULT_PLACEMENT.iter().map(|s| s.to_string()).collect(),
            adapter: AdapterKind::Hydra,
            gate: GateMode::Learnable,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn adamw(&self) -> AdamWParams {
        AdamWParams {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.heads == 0 {
            return Err(Error::Config("heads must be >= 1".into()));
        }
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if let Some(n) = self.max_grad_norm {
            if !(n > 0.0) {
                return Err(Error::Config("max_grad_norm must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Toy dataset settings.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub samples_per_class: usize,
    pub jitter: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            samples_per_class: 64,
            jitter: 0.05,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: DenoiserConfig,
    pub data: DataConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

pub const CONFIG_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_eps",
    "weight_decay",
    "rank",
    "alpha",
    "heads",
    "seed",
    "schedule",
    "timesteps",
    "placement",
    "adapter",
    "gate",
    "max_grad_norm",
    "frames",
    "channels",
    "model_dim",
    "mlp_dim",
    "blocks",
    "num_classes",
    "samples_per_class",
    "jitter",
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let m = &mut self.model;
        match key {
            "epochs" => t.epochs = parse_value(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "beta1" => t.beta1 = parse_value(key, value)?,
            "beta2" => t.beta2 = parse_value(key, value)?,
            "adam_eps" => t.adam_eps = parse_value(key, value)?,
            "weight_decay" => t.weight_decay = parse_value(key, value)?,
            "rank" => t.rank = parse_value(key, value)?,
            "alpha" => t.alpha = parse_value(key, value)?,
            "heads" => t.heads = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "schedule" => t.schedule = value.parse()?,
            "timesteps" => t.timesteps = parse_value(key, value)?,
            "placement" => {
                t.placement = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "adapter" => t.adapter = value.parse()?,
            "gate" => t.gate = value.parse()?,
            "max_grad_norm" => {
                t.max_grad_norm = match value {
                    "none" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "frames" => m.frames = parse_value(key, value)?,
            "channels" => m.channels = parse_value(key, value)?,
            "model_dim" => m.model_dim = parse_value(key, value)?,
            "mlp_dim" => m.mlp_dim = parse_value(key, value)?,
            "blocks" => m.blocks = parse_value(key, value)?,
            "num_classes" => m.num_classes = parse_value(key, value)?,
            "samples_per_class" => self.data.samples_per_class = parse_value(key, value)?,
            "jitter" => self.data.jitter = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
            seen.push(key);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        if !(self.data.jitter >= 0.0) {
            return Err(Error::Config("jitter must be >= 0".into()));
        }
        if self.data.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical `(key, value)` pairs in [`CONFIG_KEYS`] order; parsing the
    /// rendered form reproduces the config exactly.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let m = &self.model;
        let values = [
            t.epochs.to_string(),
            t.batch_size.to_string(),
            t.learning_rate.to_string(),
            t.beta1.to_string(),
            t.beta2.to_string(),
            t.adam_eps.to_string(),
            t.weight_decay.to_string(),
            t.rank.to_string(),
            t.alpha.to_string(),
            t.heads.to_string(),
            t.seed.to_string(),
            t.schedule.as_str().to_string(),
            t.timesteps.to_string(),
            t.placement.join(","),
            t.adapter.as_str().to_string(),
            t.gate.as_str().to_string(),
            t.max_grad_norm.map_or("none".to_string(), |v| v.to_string()),
            m.frames.to_string(),
            m.channels.to_string(),
            m.model_dim.to_string(),
            m.mlp_dim.to_string(),
            m.blocks.to_string(),
            m.num_classes.to_string(),
            self.data.samples_per_class.to_string(),
            self.data.jitter.to_string(),
        ];
        CONFIG_KEYS.iter().copied().zip(values).collect()
    }

    pub fn render(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// The synthetic training set described by this config.
    pub fn dataset(&self) -> Result<Vec<LatentBatch>> {
        make_toy_dataset(
            self.model.num_classes,
            self.data.samples_per_class,
            self.model.frames,
            self.model.channels,
            self.data.jitter,
            self.train.seed,
        )
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let t = TrainConfig::default();
        assert_eq!(t.epochs, 2);
        assert_eq!(t.learning_rate, 2e-5);
        assert_eq!((t.beta1, t.beta2), (0.9, 0.99));
        assert_eq!(t.weight_decay, 0.01);
        assert_eq!((t.rank, t.alpha, t.heads), (32, 32.0, 4));
        assert_eq!(t.batch_size, 16);
    }

    #[test]
    fn parse_and_render_roundtrip() {
        let text = "# comment\nepochs = 3\nlearning_rate=1e-3\nplacement = attn.q, mlp.fc2\nmax_grad_norm = 1.5\n\nadapter = lora\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.learning_rate, 1e-3);
        assert_eq!(cfg.train.placement, vec!["attn.q", "mlp.fc2"]);
        assert_eq!(cfg.train.max_grad_norm, Some(1.5));
        assert_eq!(cfg.train.adapter, AdapterKind::Lora);
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&RunConfig::default().render()).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_hard_error() {
        let err = RunConfig::parse("epochs = 1\nlearnig_rate = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("learnig_rate"), "{msg}");
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(RunConfig::parse("epochs\n").is_err());
        assert!(RunConfig::parse("epochs = two\n").is_err());
        assert!(RunConfig::parse("epochs = 1\nepochs = 2\n").is_err());
        assert!(RunConfig::parse("schedule = quadratic\n").is_err());
    }
}
