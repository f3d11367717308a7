//! Tensor kernels and their adjoints.
//!
//! Every differentiable forward kernel has a `*_backward` partner that maps
//! the gradient of a scalar objective w.r.t. the output to gradients w.r.t.
//! each input. [`crate::gradcheck`] verifies the pairing numerically.

mod conv;
mod dense;
mod elementwise;
mod pool;

pub use conv::{conv2d, conv2d_backward, transposed_conv2d, transposed_conv2d_backward, ConvGrads};
pub use dense::{dense, dense_backward, DenseGrads};
pub use elementwise::{
    add, concat_channels, relu, relu_backward, sigmoid, sigmoid_backward, split_channels,
    upsample_nearest2x, upsample_nearest2x_backward,
};
pub use pool::{maxpool2d, maxpool2d_backward, PoolIndices};
