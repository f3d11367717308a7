//! Micro-regression network: conv/pool feature extractor over image ⊕ mask
//! followed by a dense head that regresses normalised `(x/W, y/H)`.

use super::layers::{ConvRelu, Dense};
use super::params::{Gradients, Initializer, ParameterStore};
use super::{NetError, NetworkSpec};
use crate::ops::{self, PoolIndices};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Mrn {
    spec: NetworkSpec,
    blocks: Vec<ConvRelu>,
    dense: Vec<Dense>,
}

struct BlockCache {
    input: Tensor,
    output: Tensor,
    pool: PoolIndices,
}

pub struct MrnCache {
    blocks: Vec<BlockCache>,
    pooled_shape: Vec<usize>,
    /// Inputs of each dense layer; `dense_inputs[k + 1]` is also layer `k`'s activated output.
    dense_inputs: Vec<Tensor>,
    output: Tensor,
}

impl MrnCache {
    pub fn output(&self) -> &Tensor {
        &self.output
    }

    pub fn flatten_size(&self) -> usize {
        self.dense_inputs[0].shape()[1]
    }
}

impl Mrn {
    pub fn build(spec: &NetworkSpec, seed: u64) -> Result<(Self, ParameterStore), NetError> {
        spec.validate()?;
        let mut store = ParameterStore::new();
        let mut init = Initializer::new(seed);
        let mut blocks = Vec::new();
        let mut ch = 2;
        for (b, &c) in spec.mrn_channels.iter().enumerate() {
            blocks.push(ConvRelu::new(&mut store, &mut init, &format!("mrn.block{b}.conv"), ch, c)?);
            ch = c;
        }
        let mut dense = Vec::new();
        let mut width = spec.mrn_flatten_size();
        for (d, &g) in spec.mrn_dense.iter().enumerate() {
            dense.push(Dense::new(&mut store, &mut init, &format!("mrn.dense{d}"), width, g)?);
            width = g;
        }
        Ok((
            Self {
                spec: spec.clone(),
                blocks,
                dense,
            },
            store,
        ))
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Normalised coordinates `[N, 2]` for an `N×2×H×W` input (image channel first).
    pub fn forward(&self, store: &ParameterStore, input: &Tensor) -> Result<Tensor, NetError> {
        Ok(self.forward_train(store, input)?.output)
    }

    pub fn forward_train(&self, store: &ParameterStore, input: &Tensor) -> Result<MrnCache, NetError> {
        let [n, c, h, w] = input.dims4()?;
        if (c, h, w) != (2, self.spec.input_height, self.spec.input_width) {
            return Err(NetError::InputShape(format!(
                "MRN expects N×2×{}×{}, got {:?}",
                self.spec.input_height,
                self.spec.input_width,
                input.shape()
            )));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut x = input.clone();
        for conv in &self.blocks {
            let output = conv.forward(store, &x)?;
            let (pooled, pool) = ops::maxpool2d(&output)?;
            blocks.push(BlockCache {
                input: x,
                output,
                pool,
            });
            x = pooled;
        }
        let pooled_shape = x.shape().to_vec();
        let flat_len = x.len() / n;
        let mut x = x.reshape(&[n, flat_len])?;
        let mut dense_inputs = Vec::with_capacity(self.dense.len());
        let last = self.dense.len() - 1;
        for (k, layer) in self.dense.iter().enumerate() {
            let y = layer.forward(store, &x)?;
            dense_inputs.push(x);
            x = if k < last { ops::relu(&y) } else { y };
        }
        Ok(MrnCache {
            blocks,
            pooled_shape,
            dense_inputs,
            output: x,
        })
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        cache: &MrnCache,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<(), NetError> {
        let mut g = grad_out.clone();
        let last = self.dense.len() - 1;
        for (k, layer) in self.dense.iter().enumerate().rev() {
            if k < last {
                g = ops::relu_backward(&cache.dense_inputs[k + 1], &g)?;
            }
            g = layer.backward(store, &cache.dense_inputs[k], &g, grads)?;
        }
        let mut g = g.reshape(&cache.pooled_shape)?;
        for (conv, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            let gy = ops::maxpool2d_backward(&c.pool, &g)?;
            g = conv.backward(store, &c.input, &c.output, &gy, grads)?;
        }
        Ok(())
    }
}
