use serde::{Deserialize, Serialize};

use super::NetError;

/// Shape hyper-parameters of the two networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_height: usize,
    pub input_width: usize,
    /// Output channels of each encoder block; one 2×2 pool per block.
    pub encoder_channels: Vec<usize>,
    pub hourglass_count: usize,
    /// Number of pool/upsample levels inside each hourglass.
    pub hourglass_depth: usize,
    pub hourglass_channels: usize,
    /// Channels of each decoder stage, coarsest first.
    pub decoder_channels: Vec<usize>,
    pub mrn_channels: Vec<usize>,
    pub mrn_dense: Vec<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            input_height: 256,
            input_width: 320,
            encoder_channels: vec![16, 64, 128],
            hourglass_count: 3,
            hourglass_depth: 3,
            hourglass_channels: 128,
            decoder_channels: vec![128, 64, 16],
            mrn_channels: vec![16, 64, 128],
            mrn_dense: vec![256, 64, 16, 2],
        }
    }
}

impl NetworkSpec {
    /// Default ladders at another input size, with the hourglass depth capped
    /// at the deepest value the size admits (at most the default 3).
    ///
    /// 64×80, for instance, reaches the bottleneck at 8×10 and can pool only once more.
    pub fn for_input(height: usize, width: usize) -> Self {
        let mut spec = Self {
            input_height: height,
            input_width: width,
            ..Self::default()
        };
        let enc = spec.encoder_channels.len() as u32;
        let mut depth = spec.hourglass_depth;
        while depth > 1 {
            let f = 1usize << (enc + depth as u32);
            if height % f == 0 && width % f == 0 {
                break;
            }
            depth -= 1;
        }
        spec.hourglass_depth = depth;
        spec
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidSpec(m));
        let (h, w) = (self.input_height, self.input_width);
        if self.encoder_channels.is_empty() || self.encoder_channels.contains(&0) {
            return bad("encoder ladder must be non-empty with positive widths".into());
        }
        if self.decoder_channels.len() != self.encoder_channels.len() || self.decoder_channels.contains(&0) {
            return bad(format!(
                "decoder ladder {:?} must mirror encoder ladder {:?}",
                self.decoder_channels, self.encoder_channels
            ));
        }
        if self.hourglass_count == 0 || self.hourglass_depth == 0 {
            return bad("need at least one hourglass of depth ≥ 1".into());
        }
        if self.hourglass_channels != *self.encoder_channels.last().unwrap() {
            return bad(format!(
                "hourglass width {} must equal the last encoder width {}",
                self.hourglass_channels,
                self.encoder_channels.last().unwrap()
            ));
        }
        let enc = self.encoder_channels.len() as u32;
        for levels in [enc, enc + self.hourglass_depth as u32] {
            let f = 1usize << levels;
            if h % f != 0 || w % f != 0 {
                return bad(format!("input {h}×{w} is not divisible by {f}"));
            }
        }
        if self.mrn_channels.is_empty() || self.mrn_channels.contains(&0) {
            return bad("MRN conv ladder must be non-empty with positive widths".into());
        }
        let f = 1usize << self.mrn_channels.len();
        if h % f != 0 || w % f != 0 {
            return bad(format!("input {h}×{w} is not divisible by {f} for the MRN"));
        }
        if self.mrn_dense.last() != Some(&2) || self.mrn_dense.contains(&0) {
            return bad(format!("MRN dense widths {:?} must end in 2", self.mrn_dense));
        }
        Ok(())
    }

    /// Spatial size at the hourglass bottleneck.
    pub fn bottleneck_size(&self) -> (usize, usize) {
        let f = 1 << self.encoder_channels.len();
        (self.input_height / f, self.input_width / f)
    }

    /// Length of the MRN feature vector after flattening.
    pub fn mrn_flatten_size(&self) -> usize {
        let f = 1 << self.mrn_channels.len();
        self.mrn_channels.last().copied().unwrap_or(0) * (self.input_height / f) * (self.input_width / f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let s = NetworkSpec::default();
        s.validate().unwrap();
        assert_eq!(s.bottleneck_size(), (32, 40));
        assert_eq!(s.mrn_flatten_size(), 163_840);
    }

    #[test]
    fn desk_scale_spec() {
        let s = NetworkSpec::for_input(64, 80);
        s.validate().unwrap();
        assert_eq!(s.hourglass_depth, 1);
        assert_eq!(s.mrn_flatten_size(), 10_240);
        assert_eq!(NetworkSpec::for_input(256, 320).hourglass_depth, 3);
    }

    #[test]
    fn rejects_indivisible_height() {
        let s = NetworkSpec {
            input_height: 250,
            ..NetworkSpec::default()
        };
        assert!(matches!(s.validate(), Err(NetError::InvalidSpec(_))));
    }

    #[test]
    fn rejects_bad_ladders() {
        let mut s = NetworkSpec::default();
        s.mrn_dense = vec![256, 3];
        assert!(s.validate().is_err());
        let mut s = NetworkSpec::default();
        s.decoder_channels.pop();
        assert!(s.validate().is_err());
        let mut s = NetworkSpec::default();
        s.hourglass_depth = 0;
        assert!(s.validate().is_err());
    }
}
