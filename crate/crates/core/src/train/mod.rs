//! Two-phase training: phase 1 fits the MLN to square ground-truth masks
//! with binary cross-entropy, phase 2 fits the MRN to normalised coordinates
//! with mean squared error, and the two are then stacked unchanged.

mod mask;
mod split;
mod trainer;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adam::DEFAULT_LEARNING_RATE;
use crate::nn::NetError;
use crate::tensor::TensorError;

pub use mask::make_gt_mask;
pub use split::split_dataset;
pub use trainer::{epoch_order, stack, train_phase1, train_phase2};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 samples to split, found {found}")]
    TooFewSamples { found: usize },
    #[error("annotation ({x}, {y}) outside a {width}×{height} image")]
    InvalidAnnotation { x: f64, y: f64, width: usize, height: usize },
    #[error("sample {0} has no annotation")]
    Unannotated(String),
    #[error("non-finite loss in phase {phase}, epoch {epoch}, batch {batch}")]
    NonFiniteLoss { phase: u8, epoch: usize, batch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// Fraction of samples used for training; the rest are held out.
    pub split_fraction: f64,
    pub seed: u64,
    /// Ground-truth masks are `(2·half_width + 1)²` squares.
    pub mask_half_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: 100,
            batch_size: 8,
            input_height: 256,
            input_width: 320,
            split_fraction: 0.8,
            seed: 0,
            mask_half_width: DEFAULT_MASK_HALF_WIDTH,
        }
    }
}

/// Mask half-width at the default 256×320 input (a 43×43 square).
pub const DEFAULT_MASK_HALF_WIDTH: usize = 21;

impl TrainConfig {
    /// Defaults at another input size, with the mask square scaled by the
    /// smaller of the two resize ratios so it covers the same image fraction.
    pub fn for_input(height: usize, width: usize) -> Self {
        let base = Self::default();
        let ratio = (height as f64 / base.input_height as f64).min(width as f64 / base.input_width as f64);
        Self {
            input_height: height,
            input_width: width,
            mask_half_width: (DEFAULT_MASK_HALF_WIDTH as f64 * ratio).round() as usize,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split fraction {} must lie in (0, 1)", self.split_fraction));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based within its phase.
    pub epoch: usize,
    pub phase: u8,
    pub mean_loss: f64,
    pub seconds: f64,
}

/// One record per completed epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.mean_loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.mean_loss)
    }

    pub fn append(&mut self, other: TrainLog) {
        self.records.extend(other.records);
    }

    /// `epoch,phase,mean_loss,seconds` with a header row.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("epoch,phase,mean_loss,seconds\n");
        for r in &self.records {
            writeln!(s, "{},{},{},{:.3}", r.epoch, r.phase, r.mean_loss, r.seconds).expect("string write");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }
}
