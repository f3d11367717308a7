use std::f64::consts::{FRAC_PI_2, PI};

use super::PoincareError;
use crate::tensor::{Tensor, TensorError};

/// Block-wise ridge orientation, angles in `[0, π)` measured from the x axis
/// towards y (downwards).
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    rows: usize,
    cols: usize,
    block_size: usize,
    angles: Vec<f64>,
    coherence: Vec<f64>,
}

fn reduce(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if t >= PI {
        0.0
    } else {
        t
    }
}

impl OrientationField {
    /// A field with the given angles (reduced mod π) and full coherence.
    pub fn from_angles(rows: usize, cols: usize, block_size: usize, angles: Vec<f64>) -> Self {
        assert_eq!(angles.len(), rows * cols, "one angle per block");
        Self {
            rows,
            cols,
            block_size,
            angles: angles.into_iter().map(reduce).collect(),
            coherence: vec![1.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn angle(&self, row: usize, col: usize) -> f64 {
        self.angles[row * self.cols + col]
    }

    /// Gradient vector strength `|Σ(Gx + iGy)²| / Σ|Gx + iGy|²` in `[0, 1]`.
    pub fn coherence(&self, row: usize, col: usize) -> f64 {
        self.coherence[row * self.cols + col]
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

/// Sobel gradients with replicated borders.
fn sobel(plane: &[f32], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let px = |y: isize, x: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        plane[y * w + x] as f64
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let k = y as usize * w + x as usize;
            gx[k] = px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)
                - px(y - 1, x - 1)
                - 2.0 * px(y, x - 1)
                - px(y + 1, x - 1);
            gy[k] = px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)
                - px(y - 1, x - 1)
                - 2.0 * px(y - 1, x)
                - px(y - 1, x + 1);
        }
    }
    (gx, gy)
}

/// Least-squares block orientation of a `1×1×H×W` image.
///
/// Per block, `θ = ½·atan2(Σ2GxGy, Σ(Gx² − Gy²)) + π/2`; edge blocks may be partial.
pub fn orientation_field(image: &Tensor, block_size: usize) -> Result<OrientationField, PoincareError> {
    let [n, c, h, w] = image.dims4()?;
    if (n, c) != (1, 1) {
        return Err(TensorError::InvalidShape(format!("expected a 1×1×H×W image, got {:?}", image.shape())).into());
    }
    if block_size == 0 || h < 3 * block_size || w < 3 * block_size {
        return Err(PoincareError::TooSmall {
            height: h,
            width: w,
            block: block_size,
        });
    }
    let (gx, gy) = sobel(image.data(), h, w);
    let (rows, cols) = (h.div_ceil(block_size), w.div_ceil(block_size));
    let mut angles = Vec::with_capacity(rows * cols);
    let mut coherence = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (mut gxx, mut gyy, mut gxy) = (0.0, 0.0, 0.0);
            for y in i * block_size..((i + 1) * block_size).min(h) {
                for x in j * block_size..((j + 1) * block_size).min(w) {
                    let (a, b) = (gx[y * w + x], gy[y * w + x]);
                    gxx += a * a;
                    gyy += b * b;
                    gxy += a * b;
                }
            }
            let (re, im) = (gxx - gyy, 2.0 * gxy);
            angles.push(reduce(0.5 * im.atan2(re) + FRAC_PI_2));
            let energy = gxx + gyy;
            coherence.push(if energy > 0.0 { (re.hypot(im) / energy).min(1.0) } else { 0.0 });
        }
    }
    Ok(OrientationField {
        rows,
        cols,
        block_size,
        angles,
        coherence,
    })
}

/// `iterations` rounds of 3×3 box averaging of `(cos 2θ, sin 2θ)`; border
/// blocks average over the neighbours they have. Coherence is kept as is.
pub fn smooth_field(field: &OrientationField, iterations: usize) -> OrientationField {
    let (rows, cols) = (field.rows, field.cols);
    let mut cos2: Vec<f64> = field.angles.iter().map(|t| (2.0 * t).cos()).collect();
    let mut sin2: Vec<f64> = field.angles.iter().map(|t| (2.0 * t).sin()).collect();
    if iterations == 0 {
        return field.clone();
    }
    for _ in 0..iterations {
        let mut c = vec![0.0; rows * cols];
        let mut s = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                let (mut sc, mut ss, mut n) = (0.0, 0.0, 0.0);
                for ni in i.saturating_sub(1)..=(i + 1).min(rows - 1) {
                    for nj in j.saturating_sub(1)..=(j + 1).min(cols - 1) {
                        sc += cos2[ni * cols + nj];
                        ss += sin2[ni * cols + nj];
                        n += 1.0;
                    }
                }
                c[i * cols + j] = sc / n;
                s[i * cols + j] = ss / n;
            }
        }
        cos2 = c;
        sin2 = s;
    }
    OrientationField {
        angles: sin2.iter().zip(&cos2).map(|(s, c)| reduce(0.5 * s.atan2(*c))).collect(),
        ..field.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_fingerprint, Point, SyntheticParams};

    /// Smallest distance between two orientations modulo π.
    fn angle_gap(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn parallel_ridges_run_perpendicular_to_the_wave_normal() {
        for alpha in [0.0, 0.4, 1.2, 2.0, 2.9] {
            let img = synth_fingerprint(&SyntheticParams::parallel(alpha, 0.0, 0), 64, 80).unwrap().image;
            let f = orientation_field(&img, 8).unwrap();
            for i in 1..f.rows() - 1 {
                for j in 1..f.cols() - 1 {
                    let gap = angle_gap(f.angle(i, j), alpha + FRAC_PI_2);
                    assert!(gap < 0.1, "alpha {alpha} block ({i},{j}) gap {gap}");
                    assert!(f.coherence(i, j) > 0.9);
                }
            }
        }
    }

    #[test]
    fn constant_image_has_no_coherence() {
        let f = orientation_field(&Tensor::full(&[1, 1, 32, 40], 0.6), 8).unwrap();
        assert_eq!((f.rows(), f.cols()), (4, 5));
        assert!(f.angles().iter().all(|a| (0.0..PI).contains(a)));
        for i in 0..4 {
            for j in 0..5 {
                assert_eq!(f.coherence(i, j), 0.0);
            }
        }
    }

    #[test]
    fn whorl_ridges_are_tangent_to_circles() {
        let (cx, cy) = (60.0, 52.0);
        let img = synth_fingerprint(&SyntheticParams::whorl(Point::new(cx, cy), 0.0, 0), 104, 120).unwrap().image;
        let f = orientation_field(&img, 8).unwrap();
        for i in 0..f.rows() {
            for j in 0..f.cols() {
                let (bx, by) = (j as f64 * 8.0 + 3.5, i as f64 * 8.0 + 3.5);
                if (bx - cx).hypot(by - cy) < 20.0 {
                    continue;
                }
                let phi = (by - cy).atan2(bx - cx);
                let gap = angle_gap(f.angle(i, j), phi + FRAC_PI_2);
                assert!(gap < 0.2, "block ({i},{j}) gap {gap}");
            }
        }
    }

    #[test]
    fn grid_is_rounded_up_and_small_images_rejected() {
        let f = orientation_field(&Tensor::zeros(&[1, 1, 25, 33]), 8).unwrap();
        assert_eq!((f.rows(), f.cols()), (4, 5));
        assert!(matches!(
            orientation_field(&Tensor::zeros(&[1, 1, 23, 40]), 8),
            Err(PoincareError::TooSmall { .. })
        ));
    }

    #[test]
    fn smoothing() {
        let flat = OrientationField::from_angles(5, 5, 8, vec![0.3; 25]);
        assert_eq!(smooth_field(&flat, 0), flat);
        let s = smooth_field(&flat, 3);
        assert!(s.angles().iter().all(|a| (a - 0.3).abs() < 1e-12));

        let mut angles = vec![0.2; 49];
        angles[24] = 0.2 + 1.2;
        let spiky = OrientationField::from_angles(7, 7, 8, angles);
        // the centre stays put on iteration 2 because its whole 3×3 window is uniform after 1
        let devs: Vec<f64> = (0..6).map(|it| angle_gap(smooth_field(&spiky, it).angle(3, 3), 0.2)).collect();
        for w in devs.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{devs:?}");
        }
        assert!(devs[5] < 0.1 * devs[0], "{devs:?}");
    }
}
