//! Model directories: `model.spnc` (all parameters), `network.json`
//! (architecture, training config and the command that produced them),
//! `train_log.csv` and `split.json`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use spnet_core::nn::{load_checkpoint, NetworkSpec, SpNet};
use spnet_core::train::TrainConfig;

pub const MODEL_FILE: &str = "model.spnc";
pub const NETWORK_FILE: &str = "network.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const SPLIT_FILE: &str = "split.json";

/// Contents of `network.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDir {
    pub spec: NetworkSpec,
    pub train: TrainConfig,
    /// Phases whose weights are trained, in the order they ran.
    pub phases_trained: Vec<u8>,
    pub dataset: String,
    /// The argument vectors of every `train` run that wrote this directory.
    pub commands: Vec<Vec<String>>,
}

/// Image ids on each side of the train/test split, as written to `split.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl ModelDir {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(NETWORK_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(NETWORK_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// The stacked detector stored in `dir`.
    pub fn load_net(dir: &Path) -> Result<(Self, SpNet)> {
        let meta = Self::read(dir)?;
        let path = dir.join(MODEL_FILE);
        let store = load_checkpoint(&path).with_context(|| format!("loading {}", path.display()))?;
        let net = SpNet::from_parameters(&meta.spec, &store).context("checkpoint does not match network.json")?;
        Ok((meta, net))
    }
}

impl Split {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SPLIT_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(SPLIT_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
