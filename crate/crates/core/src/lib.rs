//! Fingerprint singular-point detection.
//!
//! The crate provides everything needed to train and evaluate a two-stage
//! detector from scratch on the CPU:
//!
//! - [`tensor`], [`ops`], [`loss`], [`adam`], [`gradcheck`]: deterministic dense
//!   kernels with hand-written adjoints and the optimizer.
//! - [`nn`]: the macro-localization network (encoder, stacked hourglasses,
//!   decoder) and the micro-regression network, plus checkpoints.
//! - [`train`]: the two-phase trainer.
//! - [`data`]: dataset manifests, image I/O and a synthetic whorl generator.
//! - [`poincare`]: the classical orientation-field / Poincaré-index detector.
//! - [`eval`]: true-detection-rate scoring and report files.

pub mod adam;
pub mod data;
pub mod eval;
pub mod fpenv;
pub mod gradcheck;
pub mod loss;
pub mod nn;
pub mod ops;
pub mod poincare;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use loss::LossValue;
pub use tensor::{Scalar, Tensor, TensorError};
