use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Point, Sample};
use crate::tensor::Tensor;

pub const MIN_WAVELENGTH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PatternKind {
    /// Concentric ridges around `center`, a singular point of index +1.
    Whorl { center: Point },
    /// Straight ridges; `angle` is the direction across the ridges, in radians.
    Parallel { angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub pattern: PatternKind,
    /// Ridge period in pixels.
    pub wavelength: f64,
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticParams {
    pub const DEFAULT_WAVELENGTH: f64 = 9.0;

    pub fn whorl(center: Point, noise_sigma: f64, seed: u64) -> Self {
        Self {
            pattern: PatternKind::Whorl { center },
            wavelength: Self::DEFAULT_WAVELENGTH,
            noise_sigma,
            seed,
        }
    }

    pub fn parallel(angle: f64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            pattern: PatternKind::Parallel { angle },
            wavelength: Self::DEFAULT_WAVELENGTH,
            noise_sigma,
            seed,
        }
    }

    fn validate(&self, height: usize, width: usize) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidParams(m));
        if height == 0 || width == 0 {
            return bad(format!("empty {height}×{width} image"));
        }
        if !(self.wavelength >= MIN_WAVELENGTH && self.wavelength.is_finite()) {
            return bad(format!("wavelength {} must be at least {MIN_WAVELENGTH}", self.wavelength));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be finite and non-negative", self.noise_sigma));
        }
        match self.pattern {
            PatternKind::Whorl { center } if !center.inside(width, height) => {
                bad(format!("whorl centre ({}, {}) outside the {width}×{height} image", center.x, center.y))
            }
            PatternKind::Parallel { angle } if !angle.is_finite() => bad("non-finite ridge angle".into()),
            _ => Ok(()),
        }
    }
}

/// Renders a synthetic ridge pattern; whorls are annotated with their centre.
pub fn synth_fingerprint(params: &SyntheticParams, height: usize, width: usize) -> Result<Sample, DataError> {
    params.validate(height, width)?;
    let k = TAU / params.wavelength;
    let phase = |x: f64, y: f64| match params.pattern {
        PatternKind::Whorl { center } => k * (x - center.x).hypot(y - center.y),
        PatternKind::Parallel { angle } => k * (x * angle.cos() + y * angle.sin()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sigma).expect("validated sigma");
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let mut v = 0.5 + 0.5 * phase(x as f64, y as f64).cos();
            if params.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            data.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    let image = Tensor::from_vec(&[1, 1, height, width], data)?;
    let annotation = match params.pattern {
        PatternKind::Whorl { center } => Some(center),
        PatternKind::Parallel { .. } => None,
    };
    Sample::new("synthetic", image, annotation)
}

/// `count` whorls with centres uniform over the middle half of each axis.
///
/// Ids are `whorl_0000.png`, `whorl_0001.png`, …
pub fn whorl_corpus(
    count: usize,
    height: usize,
    width: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Sample>, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let center = Point::new(
                rng.gen_range(width as f64 / 4.0..width as f64 * 0.75),
                rng.gen_range(height as f64 / 4.0..height as f64 * 0.75),
            );
            let params = SyntheticParams::whorl(center, noise_sigma, rng.gen());
            let mut s = synth_fingerprint(&params, height, width)?;
            s.id = format!("whorl_{i:04}.png");
            Ok(s)
        })
        .collect()
}
