//! Network architecture: the macro-localization network (MLN), the
//! micro-regression network (MRN), their composition, and checkpoints.

mod checkpoint;
mod hourglass;
mod layers;
mod mln;
mod mrn;
mod params;
mod spec;
mod spnet;

use thiserror::Error;

use crate::tensor::TensorError;

pub use checkpoint::{
    decode as decode_checkpoint, encode as encode_checkpoint, load_checkpoint, save_checkpoint,
    save_checkpoint_with_optimizer, CheckpointError,
};
pub use hourglass::{Hourglass, HourglassCache};
pub use mln::{Mln, MlnCache};
pub use mrn::{Mrn, MrnCache};
pub use params::{Gradients, ParamId, ParameterStore};
pub use spec::NetworkSpec;
pub use spnet::{Detection, SpNet};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("unexpected input shape: {0}")]
    InputShape(String),
    #[error("duplicate parameter name {0}")]
    DuplicateParameter(String),
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
