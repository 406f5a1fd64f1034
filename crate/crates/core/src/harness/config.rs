use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bcresnet::{ModelConfig, DROPOUT_RATE};
use crate::error::{Error, Result};
use crate::grad::{LrSchedule, MOMENTUM, WEIGHT_DECAY};
use crate::scene::NUM_CLASSES;
use crate::tflab::Mic;

/// Training recipe; the defaults are the full 200-epoch schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_epochs: f64,
    pub peak_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seeds: Vec<u64>,
    pub mics: Vec<Mic>,
    pub tau: f64,
    pub classes: usize,
    pub dropout: f64,
    pub dataset_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 100,
            warmup_epochs: 5.0,
            peak_lr: 0.1,
            momentum: MOMENTUM,
            weight_decay: WEIGHT_DECAY,
            seeds: (0..5).collect(),
            mics: vec![Mic::Iec],
            tau: 3.0,
            classes: NUM_CLASSES,
            dropout: DROPOUT_RATE,
            dataset_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Parse {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.warmup_epochs >= 0.0 && self.warmup_epochs <= self.epochs as f64) {
            return bad("warmup_epochs must lie in [0, epochs]");
        }
        if !(self.peak_lr >= 0.0 && self.peak_lr.is_finite()) {
            return bad("peak_lr must be a non-negative number");
        }
        if self.mics.is_empty() {
            return bad("mic subset must not be empty");
        }
        let mut mics = self.mics.clone();
        mics.sort();
        mics.dedup();
        if mics.len() != self.mics.len() {
            return bad("mic subset has duplicates");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.classes < 2 {
            return bad("at least two classes are required");
        }
        self.model_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            tau: self.tau,
            in_channels: self.mics.len(),
            num_classes: self.classes,
            dropout: self.dropout,
        }
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            warmup_epochs: self.warmup_epochs,
            total_epochs: self.epochs as f64,
            peak: self.peak_lr,
        }
    }
}
