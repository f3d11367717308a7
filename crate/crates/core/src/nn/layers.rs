//! Parameterised layers. Each keeps only [`ParamId`]s; values live in a
//! [`ParameterStore`] so one network definition serves any checkpoint.

use super::params::{Gradients, Initializer, ParamId, ParameterStore};
use super::NetError;
use crate::ops;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Conv {
    weight: ParamId,
    bias: ParamId,
}

impl Conv {
    pub(crate) fn new(
        store: &mut ParameterStore,
        init: &mut Initializer,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Result<Self, NetError> {
        let w = init.weight(&[out_channels, in_channels, kernel, kernel], in_channels * kernel * kernel);
        Ok(Self {
            weight: store.register(format!("{name}.weight"), w)?,
            bias: store.register(format!("{name}.bias"), Tensor::zeros(&[out_channels]))?,
        })
    }

    /// All-zero weights and bias; the layer outputs exactly zero until trained.
    pub(crate) fn zeroed(
        store: &mut ParameterStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Result<Self, NetError> {
        Ok(Self {
            weight: store.register(
                format!("{name}.weight"),
                Tensor::zeros(&[out_channels, in_channels, kernel, kernel]),
            )?,
            bias: store.register(format!("{name}.bias"), Tensor::zeros(&[out_channels]))?,
        })
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<Tensor, NetError> {
        Ok(ops::conv2d(x, store.get(self.weight), store.get(self.bias))?)
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        x: &Tensor,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor, NetError> {
        let g = ops::conv2d_backward(x, store.get(self.weight), grad_out)?;
        grads.accumulate(self.weight, &g.weight)?;
        grads.accumulate(self.bias, &g.bias)?;
        Ok(g.input)
    }
}

/// Convolution followed by ReLU; the cache is `(input, activated output)`.
#[derive(Debug, Clone)]
pub struct ConvRelu(pub Conv);

impl ConvRelu {
    pub(crate) fn new(
        store: &mut ParameterStore,
        init: &mut Initializer,
        name: &str,
        in_channels: usize,
        out_channels: usize,
    ) -> Result<Self, NetError> {
        Ok(Self(Conv::new(store, init, name, in_channels, out_channels, 3)?))
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<Tensor, NetError> {
        Ok(ops::relu(&self.0.forward(store, x)?))
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        x: &Tensor,
        y: &Tensor,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor, NetError> {
        let g = ops::relu_backward(y, grad_out)?;
        self.0.backward(store, x, &g, grads)
    }
}

#[derive(Debug, Clone)]
pub struct TransposedConv {
    weight: ParamId,
    bias: ParamId,
}

impl TransposedConv {
    pub(crate) fn new(
        store: &mut ParameterStore,
        init: &mut Initializer,
        name: &str,
        in_channels: usize,
        out_channels: usize,
    ) -> Result<Self, NetError> {
        // Each output pixel of a stride-2 3×3 transposed conv sums on average
        // 9/4 taps per input channel.
        let fan_in = (in_channels * 9).div_ceil(4);
        let w = init.weight(&[in_channels, out_channels, 3, 3], fan_in);
        Ok(Self {
            weight: store.register(format!("{name}.weight"), w)?,
            bias: store.register(format!("{name}.bias"), Tensor::zeros(&[out_channels]))?,
        })
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<Tensor, NetError> {
        Ok(ops::transposed_conv2d(x, store.get(self.weight), store.get(self.bias))?)
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        x: &Tensor,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor, NetError> {
        let g = ops::transposed_conv2d_backward(x, store.get(self.weight), grad_out)?;
        grads.accumulate(self.weight, &g.weight)?;
        grads.accumulate(self.bias, &g.bias)?;
        Ok(g.input)
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    weight: ParamId,
    bias: ParamId,
}

impl Dense {
    pub(crate) fn new(
        store: &mut ParameterStore,
        init: &mut Initializer,
        name: &str,
        inputs: usize,
        outputs: usize,
    ) -> Result<Self, NetError> {
        Ok(Self {
            weight: store.register(format!("{name}.weight"), init.weight(&[inputs, outputs], inputs))?,
            bias: store.register(format!("{name}.bias"), Tensor::zeros(&[outputs]))?,
        })
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<Tensor, NetError> {
        Ok(ops::dense(x, store.get(self.weight), store.get(self.bias))?)
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        x: &Tensor,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor, NetError> {
        let g = ops::dense_backward(x, store.get(self.weight), grad_out)?;
        grads.accumulate(self.weight, &g.weight)?;
        grads.accumulate(self.bias, &g.bias)?;
        Ok(g.input)
    }
}
