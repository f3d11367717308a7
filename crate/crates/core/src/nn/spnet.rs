use serde::{Deserialize, Serialize};

use super::{Mln, Mrn, NetError, NetworkSpec, ParameterStore};
use crate::fpenv::FlushDenormals;
use crate::ops;
use crate::tensor::Tensor;

/// A predicted singular point in model-input pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: f32,
    pub y: f32,
}

impl Detection {
    /// Scales normalised `(x/W, y/H)` to pixels, clamped to `[0, W−1] × [0, H−1]`.
    pub fn from_normalized(nx: f32, ny: f32, width: usize, height: usize) -> Self {
        let clamp = |v: f32, extent: usize| {
            let v = if v.is_finite() { v } else { 0.0 };
            v.clamp(0.0, extent as f32 - 1.0)
        };
        Self {
            x: clamp(nx * width as f32, width),
            y: clamp(ny * height as f32, height),
        }
    }
}

/// Both trained networks composed into the end-to-end detector.
#[derive(Debug, Clone)]
pub struct SpNet {
    mln: Mln,
    mln_params: ParameterStore,
    mrn: Mrn,
    mrn_params: ParameterStore,
}

impl SpNet {
    /// Composes the two networks without touching any weight.
    pub fn stack(
        mln: Mln,
        mln_params: ParameterStore,
        mrn: Mrn,
        mrn_params: ParameterStore,
    ) -> Result<Self, NetError> {
        let (a, b) = (mln.spec(), mrn.spec());
        if (a.input_height, a.input_width) != (b.input_height, b.input_width) {
            return Err(NetError::SpecMismatch(format!(
                "MLN input {}×{} vs MRN input {}×{}",
                a.input_height, a.input_width, b.input_height, b.input_width
            )));
        }
        Ok(Self {
            mln,
            mln_params,
            mrn,
            mrn_params,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.mln.spec()
    }

    pub fn mln_params(&self) -> &ParameterStore {
        &self.mln_params
    }

    pub fn mrn_params(&self) -> &ParameterStore {
        &self.mrn_params
    }

    /// All parameters, MLN first, as saved in a checkpoint.
    pub fn parameters(&self) -> Result<ParameterStore, NetError> {
        let mut all = self.mln_params.clone();
        all.extend(&self.mrn_params)?;
        Ok(all)
    }

    /// Rebuilds a detector from a combined checkpoint store.
    pub fn from_parameters(spec: &NetworkSpec, store: &ParameterStore) -> Result<Self, NetError> {
        let (mln, mut mln_params) = Mln::build(spec, 0)?;
        let (mrn, mut mrn_params) = Mrn::build(spec, 0)?;
        mln_params.load_from(&store.filter_prefix("mln."))?;
        mrn_params.load_from(&store.filter_prefix("mrn."))?;
        Self::stack(mln, mln_params, mrn, mrn_params)
    }

    /// Mask and detection for each image of an `N×1×H×W` batch (values in `[0, 1]`).
    ///
    /// The raw mask probabilities feed the regressor unthresholded.
    pub fn forward(&self, image: &Tensor) -> Result<(Tensor, Vec<Detection>), NetError> {
        let _ftz = FlushDenormals::new();
        let mask = self.mln.forward(&self.mln_params, image)?;
        let input = ops::concat_channels(image, &mask)?;
        let coords = self.mrn.forward(&self.mrn_params, &input)?;
        let spec = self.spec();
        let detections = coords
            .data()
            .chunks(2)
            .map(|c| Detection::from_normalized(c[0], c[1], spec.input_width, spec.input_height))
            .collect();
        Ok((mask, detections))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_is_clamped() {
        let d = Detection::from_normalized(1.5, -0.2, 80, 64);
        assert_eq!((d.x, d.y), (79.0, 0.0));
        let d = Detection::from_normalized(0.5, 0.25, 80, 64);
        assert_eq!((d.x, d.y), (40.0, 16.0));
        let d = Detection::from_normalized(f32::NAN, 0.0, 80, 64);
        assert_eq!(d.x, 0.0);
    }

    #[test]
    fn stacking_rejects_mismatched_sizes() {
        let small = NetworkSpec::for_input(64, 80);
        let mut tiny = NetworkSpec::for_input(32, 48);
        tiny.hourglass_depth = 1;
        let (mln, a) = Mln::build(&small, 0).unwrap();
        let (mrn, b) = Mrn::build(&tiny, 0).unwrap();
        assert!(matches!(SpNet::stack(mln, a, mrn, b), Err(NetError::SpecMismatch(_))));
    }
}
