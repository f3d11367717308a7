use serde::{Deserialize, Serialize};

use super::{DataError, Point};
use crate::tensor::Tensor;

pub const MIN_RESIZE_SIDE: usize = 8;

/// Resize factors `target / original` per axis.
///
/// Pixel centres are aligned: original coordinate `u` maps to `(u + ½)·s − ½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactors {
    pub y: f64,
    pub x: f64,
}

impl ScaleFactors {
    pub const IDENTITY: Self = Self { x: 1.0, y: 1.0 };

    pub fn to_input(self, p: Point) -> Point {
        Point::new((p.x + 0.5) * self.x - 0.5, (p.y + 0.5) * self.y - 0.5)
    }

    pub fn to_original(self, p: Point) -> Point {
        Point::new((p.x + 0.5) / self.x - 0.5, (p.y + 0.5) / self.y - 0.5)
    }
}

/// Bilinear resampling of every `H×W` plane of an `N×C×H×W` tensor.
pub fn resize_bilinear(image: &Tensor, height: usize, width: usize) -> Result<(Tensor, ScaleFactors), DataError> {
    if height < MIN_RESIZE_SIDE || width < MIN_RESIZE_SIDE {
        return Err(DataError::InvalidTarget { height, width });
    }
    let [n, c, h0, w0] = image.dims4()?;
    let scale = ScaleFactors {
        y: height as f64 / h0 as f64,
        x: width as f64 / w0 as f64,
    };
    if (h0, w0) == (height, width) {
        return Ok((image.clone(), scale));
    }
    let taps = |dst: usize, src_len: usize, s: f64| -> Vec<(usize, usize, f32)> {
        (0..dst)
            .map(|d| {
                let u = ((d as f64 + 0.5) / s - 0.5).clamp(0.0, (src_len - 1) as f64);
                let lo = u.floor() as usize;
                let hi = (lo + 1).min(src_len - 1);
                (lo, hi, (u - lo as f64) as f32)
            })
            .collect()
    };
    let rows = taps(height, h0, scale.y);
    let cols = taps(width, w0, scale.x);
    let mut out = Tensor::zeros(&[n, c, height, width]);
    for (src, dst) in image.data().chunks(h0 * w0).zip(out.data_mut().chunks_mut(height * width)) {
        for (y, &(y0, y1, fy)) in rows.iter().enumerate() {
            let (r0, r1) = (&src[y0 * w0..][..w0], &src[y1 * w0..][..w0]);
            for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
                dst[y * width + x] = top + (bottom - top) * fy;
            }
        }
    }
    Ok((out, scale))
}
