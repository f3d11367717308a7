use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "spnet", version, about = "Fingerprint singular-point detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a corpus of synthetic whorl fingerprints with their centres as ground truth.
    Synth(SynthArgs),
    /// Train the localization and regression networks on an annotated dataset.
    Train(TrainArgs),
    /// Run a trained model over images and write `filename,x,y` predictions.
    Predict(PredictArgs),
    /// Score predictions against a ground-truth manifest.
    Eval(EvalArgs),
    /// Detect singular points with the orientation-field / Poincaré-index baseline.
    Baseline(BaselineArgs),
    /// Serve the browser annotation tool for a dataset directory.
    Annotate(AnnotateArgs),
}

/// `HxW`, e.g. `256x320`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub height: usize,
    pub width: usize,
}

impl FromStr for ImageSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("bad dimension {v:?} in {s:?}"))
        };
        Ok(Self {
            height: parse(h)?,
            width: parse(w)?,
        })
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "256x320")]
    pub size: ImageSize,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory holding `images/` and `ground_truth.csv`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model directory to create or update.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub phase: Phase,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Epochs for phase 2 when it should differ from `--epochs`.
    #[arg(long)]
    pub phase2_epochs: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = spnet_core::adam::DEFAULT_LEARNING_RATE)]
    pub lr: f32,
    #[arg(long, default_value = "256x320")]
    pub size: ImageSize,
    /// Fraction of annotated images used for training; the rest are held out.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mask square half-width in input pixels; defaults to 21 scaled to `--size`.
    #[arg(long)]
    pub mask_half_width: Option<usize>,
    /// Store Adam moments in the checkpoint so training can resume.
    #[arg(long)]
    pub save_optimizer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Image files, image directories or dataset directories.
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Restrict to one side of the model's train/test split.
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = spnet_core::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Directory for `report.json`, `distances.csv` and `curve.svg`.
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long)]
    pub dataset_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = spnet_core::poincare::DEFAULT_BLOCK_SIZE)]
    pub block_size: usize,
    #[arg(long, default_value_t = spnet_core::poincare::DEFAULT_SMOOTHING)]
    pub smoothing: usize,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    /// Serve the UI from this directory instead of the bundled page.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_size_parsing() {
        assert_eq!("64x80".parse::<ImageSize>().unwrap(), ImageSize { height: 64, width: 80 });
        assert_eq!("256X320".parse::<ImageSize>().unwrap().to_string(), "256x320");
        for bad in ["64", "0x80", "ax80", "64x"] {
            assert!(bad.parse::<ImageSize>().is_err(), "{bad}");
        }
    }

    #[test]
    fn parser_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
