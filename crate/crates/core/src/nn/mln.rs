//! Macro-localization network: a U-shaped encoder/decoder with stacked
//! hourglasses at the bottleneck, producing a per-pixel probability mask.

use super::hourglass::{Hourglass, HourglassCache};
use super::layers::{Conv, ConvRelu, TransposedConv};
use super::params::{Gradients, Initializer, ParameterStore};
use super::{NetError, NetworkSpec};
use crate::ops::{self, PoolIndices};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
struct EncoderBlock {
    conv1: ConvRelu,
    conv2: ConvRelu,
}

#[derive(Debug, Clone)]
struct DecoderStage {
    up: TransposedConv,
    conv1: ConvRelu,
    conv2: ConvRelu,
}

#[derive(Debug, Clone)]
pub struct Mln {
    spec: NetworkSpec,
    encoder: Vec<EncoderBlock>,
    hourglasses: Vec<Hourglass>,
    decoder: Vec<DecoderStage>,
    head: Conv,
}

struct EncoderCache {
    input: Tensor,
    mid: Tensor,
    /// Pre-pool feature map, also the merge-connection source.
    feature: Tensor,
    pool: PoolIndices,
}

struct DecoderCache {
    input: Tensor,
    merged: Tensor,
    mid: Tensor,
    output: Tensor,
    up_channels: usize,
}

/// Activations retained by [`Mln::forward_train`] for the backward pass.
pub struct MlnCache {
    encoder: Vec<EncoderCache>,
    hourglasses: Vec<HourglassCache>,
    decoder: Vec<DecoderCache>,
    mask: Tensor,
}

impl MlnCache {
    pub fn mask(&self) -> &Tensor {
        &self.mask
    }

    /// Input to the first hourglass.
    pub fn bottleneck_input_shape(&self) -> Vec<usize> {
        let e = self.encoder.last().expect("at least one encoder block");
        let s = e.feature.shape();
        vec![s[0], s[1], s[2] / 2, s[3] / 2]
    }
}

impl Mln {
    /// Builds the network and its freshly initialised parameters.
    pub fn build(spec: &NetworkSpec, seed: u64) -> Result<(Self, ParameterStore), NetError> {
        spec.validate()?;
        let mut store = ParameterStore::new();
        let mut init = Initializer::new(seed);
        let s = &mut store;
        let i = &mut init;

        let mut encoder = Vec::new();
        let mut ch = 1;
        for (b, &c) in spec.encoder_channels.iter().enumerate() {
            encoder.push(EncoderBlock {
                conv1: ConvRelu::new(s, i, &format!("mln.encoder.block{b}.conv1"), ch, c)?,
                conv2: ConvRelu::new(s, i, &format!("mln.encoder.block{b}.conv2"), c, c)?,
            });
            ch = c;
        }
        let hourglasses = (0..spec.hourglass_count)
            .map(|h| {
                Hourglass::new(
                    s,
                    i,
                    &format!("mln.hourglass{h}"),
                    spec.hourglass_channels,
                    spec.hourglass_depth,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut decoder = Vec::new();
        for (d, &c) in spec.decoder_channels.iter().enumerate() {
            let skip = spec.encoder_channels[spec.encoder_channels.len() - 1 - d];
            decoder.push(DecoderStage {
                up: TransposedConv::new(s, i, &format!("mln.decoder.stage{d}.up"), ch, c)?,
                conv1: ConvRelu::new(s, i, &format!("mln.decoder.stage{d}.conv1"), c + skip, c)?,
                conv2: ConvRelu::new(s, i, &format!("mln.decoder.stage{d}.conv2"), c, c)?,
            });
            ch = c;
        }
        // residual hourglass merges grow activations; a zero head starts every pixel at 0.5
        let head = Conv::zeroed(s, "mln.head", ch, 1, 1)?;
        Ok((
            Self {
                spec: spec.clone(),
                encoder,
                hourglasses,
                decoder,
                head,
            },
            store,
        ))
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn check_input(&self, image: &Tensor) -> Result<(), NetError> {
        let [_, c, h, w] = image.dims4()?;
        if (c, h, w) != (1, self.spec.input_height, self.spec.input_width) {
            return Err(NetError::InputShape(format!(
                "MLN expects N×1×{}×{}, got {:?}",
                self.spec.input_height,
                self.spec.input_width,
                image.shape()
            )));
        }
        Ok(())
    }

    /// Mask probabilities in (0, 1), same shape as `image` (`N×1×H×W`).
    pub fn forward(&self, store: &ParameterStore, image: &Tensor) -> Result<Tensor, NetError> {
        Ok(self.forward_train(store, image)?.mask)
    }

    pub fn forward_train(&self, store: &ParameterStore, image: &Tensor) -> Result<MlnCache, NetError> {
        self.check_input(image)?;
        let mut encoder = Vec::with_capacity(self.encoder.len());
        let mut x = image.clone();
        for block in &self.encoder {
            let mid = block.conv1.forward(store, &x)?;
            let feature = block.conv2.forward(store, &mid)?;
            let (pooled, pool) = ops::maxpool2d(&feature)?;
            encoder.push(EncoderCache {
                input: x,
                mid,
                feature,
                pool,
            });
            x = pooled;
        }
        let mut hourglasses = Vec::with_capacity(self.hourglasses.len());
        for hg in &self.hourglasses {
            let (y, cache) = hg.forward(store, &x)?;
            hourglasses.push(cache);
            x = y;
        }
        let mut decoder = Vec::with_capacity(self.decoder.len());
        for (stage, enc) in self.decoder.iter().zip(encoder.iter().rev()) {
            let input = x;
            let up = stage.up.forward(store, &input)?;
            let up_channels = up.shape()[1];
            let merged = ops::concat_channels(&up, &enc.feature)?;
            let mid = stage.conv1.forward(store, &merged)?;
            let output = stage.conv2.forward(store, &mid)?;
            x = output.clone();
            decoder.push(DecoderCache {
                input,
                merged,
                mid,
                output,
                up_channels,
            });
        }
        let mask = ops::sigmoid(&self.head.forward(store, &x)?);
        Ok(MlnCache {
            encoder,
            hourglasses,
            decoder,
            mask,
        })
    }

    /// Accumulates parameter gradients given `d loss / d mask`.
    pub fn backward(
        &self,
        store: &ParameterStore,
        cache: &MlnCache,
        grad_mask: &Tensor,
        grads: &mut Gradients,
    ) -> Result<(), NetError> {
        let g_logits = ops::sigmoid_backward(&cache.mask, grad_mask)?;
        let head_in = &cache.decoder.last().expect("decoder stage").output;
        let mut g = self.head.backward(store, head_in, &g_logits, grads)?;

        let mut merge_grads = Vec::with_capacity(self.decoder.len());
        for (stage, c) in self.decoder.iter().zip(&cache.decoder).rev() {
            let gm = stage.conv2.backward(store, &c.mid, &c.output, &g, grads)?;
            let gc = stage.conv1.backward(store, &c.merged, &c.mid, &gm, grads)?;
            let (g_up, g_skip) = ops::split_channels(&gc, c.up_channels)?;
            merge_grads.push(g_skip);
            g = stage.up.backward(store, &c.input, &g_up, grads)?;
        }
        // merge_grads[k] belongs to encoder block k (outermost stage ran last).
        for (hg, c) in self.hourglasses.iter().zip(&cache.hourglasses).rev() {
            g = hg.backward(store, c, &g, grads)?;
        }
        for ((block, c), g_skip) in self.encoder.iter().zip(&cache.encoder).zip(&merge_grads).rev() {
            let mut gf = ops::maxpool2d_backward(&c.pool, &g)?;
            gf.add_assign(g_skip)?;
            let gm = block.conv2.backward(store, &c.mid, &c.feature, &gf, grads)?;
            g = block.conv1.backward(store, &c.input, &c.mid, &gm, grads)?;
        }
        Ok(())
    }
}
