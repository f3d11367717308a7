//! Shape-preserving hourglass block.
//!
//! Level `d` computes `relu(conv_skip(x)) + upsample(level_{d-1}(maxpool(x)))`;
//! the innermost level is a single `relu(conv(x))`. Channel width is constant.

use super::layers::ConvRelu;
use super::params::{Gradients, Initializer, ParameterStore};
use super::NetError;
use crate::ops::{self, PoolIndices};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Hourglass {
    /// Skip convolutions, outermost level first.
    skips: Vec<ConvRelu>,
    bottom: ConvRelu,
}

struct LevelCache {
    input: Tensor,
    skip: Tensor,
    pool: PoolIndices,
}

pub struct HourglassCache {
    levels: Vec<LevelCache>,
    bottom_input: Tensor,
    bottom_output: Tensor,
}

impl Hourglass {
    pub(crate) fn new(
        store: &mut ParameterStore,
        init: &mut Initializer,
        name: &str,
        channels: usize,
        depth: usize,
    ) -> Result<Self, NetError> {
        if depth == 0 {
            return Err(NetError::InvalidSpec("hourglass depth must be ≥ 1".into()));
        }
        let skips = (0..depth)
            .map(|d| ConvRelu::new(store, init, &format!("{name}.skip{d}"), channels, channels))
            .collect::<Result<Vec<_>, _>>()?;
        let bottom = ConvRelu::new(store, init, &format!("{name}.bottom"), channels, channels)?;
        Ok(Self { skips, bottom })
    }

    pub fn depth(&self) -> usize {
        self.skips.len()
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<(Tensor, HourglassCache), NetError> {
        let mut levels = Vec::with_capacity(self.skips.len());
        let mut cur = x.clone();
        for skip in &self.skips {
            let s = skip.forward(store, &cur)?;
            let (pooled, idx) = ops::maxpool2d(&cur)?;
            levels.push(LevelCache {
                input: cur,
                skip: s,
                pool: idx,
            });
            cur = pooled;
        }
        let bottom_output = self.bottom.forward(store, &cur)?;
        let mut out = bottom_output.clone();
        for level in levels.iter().rev() {
            out = ops::add(&level.skip, &ops::upsample_nearest2x(&out)?)?;
        }
        Ok((
            out,
            HourglassCache {
                levels,
                bottom_input: cur,
                bottom_output,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        cache: &HourglassCache,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor, NetError> {
        // Walk inward collecting the gradient that reaches each skip branch.
        let mut skip_grads = Vec::with_capacity(self.skips.len());
        let mut g = grad_out.clone();
        for _ in &cache.levels {
            skip_grads.push(g.clone());
            g = ops::upsample_nearest2x_backward(&g)?;
        }
        let mut g = self
            .bottom
            .backward(store, &cache.bottom_input, &cache.bottom_output, &g, grads)?;
        for ((skip, level), gs) in self.skips.iter().zip(&cache.levels).zip(&skip_grads).rev() {
            let mut gx = ops::maxpool2d_backward(&level.pool, &g)?;
            gx.add_assign(&skip.backward(store, &level.input, &level.skip, gs, grads)?)?;
            g = gx;
        }
        Ok(g)
    }
}
