//! Classical singular-point detection: a block orientation field from Sobel
//! gradients, doubled-angle smoothing, and the Poincaré index around each
//! interior block.

mod field;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

pub use field::{orientation_field, smooth_field, OrientationField};

pub const DEFAULT_BLOCK_SIZE: usize = 8;
pub const DEFAULT_SMOOTHING: usize = 2;

#[derive(Debug, Error)]
pub enum PoincareError {
    #[error("image {height}×{width} is smaller than 3 blocks of {block} pixels per side")]
    TooSmall { height: usize, width: usize, block: usize },
    #[error("block ({row}, {col}) lies on the border of a {rows}×{cols} field")]
    BorderBlock { row: usize, col: usize, rows: usize, cols: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityClass {
    Core,
    Delta,
    Whorl,
}

impl SingularityClass {
    /// Class of a loop sum, if it lies within π/2 of ±π or 2π.
    pub fn from_index(index: f64) -> Option<Self> {
        if (index - PI).abs() < FRAC_PI_2 {
            Some(Self::Core)
        } else if (index + PI).abs() < FRAC_PI_2 {
            Some(Self::Delta)
        } else if (index - 2.0 * PI).abs() < FRAC_PI_2 {
            Some(Self::Whorl)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub x: f64,
    pub y: f64,
    pub class: SingularityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub block_size: usize,
    pub smoothing_iterations: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            smoothing_iterations: DEFAULT_SMOOTHING,
        }
    }
}

/// The eight neighbours of a block as `(row, col)` offsets, in loop order.
///
/// With y pointing down this is the same rotational sense in which angles are
/// measured, so a whorl sums to +2π and a core to +π.
const LOOP: [(isize, isize); 8] = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];

/// Wraps an orientation difference into `(−π/2, π/2]`.
fn wrap_half_pi(d: f64) -> f64 {
    let mut d = d % PI;
    if d > FRAC_PI_2 {
        d -= PI;
    } else if d <= -FRAC_PI_2 {
        d += PI;
    }
    d
}

/// Sum of wrapped orientation changes around the 8-neighbour loop of block `(row, col)`.
pub fn poincare_index(field: &OrientationField, row: usize, col: usize) -> Result<f64, PoincareError> {
    let (rows, cols) = (field.rows(), field.cols());
    if row == 0 || col == 0 || row + 1 >= rows || col + 1 >= cols {
        return Err(PoincareError::BorderBlock { row, col, rows, cols });
    }
    let at = |k: usize| {
        let (di, dj) = LOOP[k % LOOP.len()];
        field.angle(row.wrapping_add_signed(di), col.wrapping_add_signed(dj))
    };
    Ok((0..LOOP.len()).map(|k| wrap_half_pi(at(k + 1) - at(k))).sum())
}

/// Orientation field, smoothing and a Poincaré scan of every interior block.
///
/// 8-connected blocks of one class merge into a single detection at their
/// centroid; locations are block centres in pixel coordinates.
pub fn detect_singularities(image: &Tensor, params: &BaselineParams) -> Result<Vec<Singularity>, PoincareError> {
    let field = smooth_field(&orientation_field(image, params.block_size)?, params.smoothing_iterations);
    let (rows, cols) = (field.rows(), field.cols());
    let mut class = vec![None; rows * cols];
    for i in 1..rows - 1 {
        for j in 1..cols - 1 {
            class[i * cols + j] = SingularityClass::from_index(poincare_index(&field, i, j)?);
        }
    }
    let centre = |k: usize| (k as f64 + 0.5) * params.block_size as f64 - 0.5;
    let mut seen = vec![false; rows * cols];
    let mut found = Vec::new();
    for start in 0..rows * cols {
        let Some(c) = class[start] else { continue };
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        while let Some(k) = stack.pop() {
            let (i, j) = (k / cols, k % cols);
            sx += centre(j);
            sy += centre(i);
            n += 1;
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let (Some(ni), Some(nj)) = (i.checked_add_signed(di), j.checked_add_signed(dj)) else {
                        continue;
                    };
                    if ni < rows && nj < cols {
                        let nk = ni * cols + nj;
                        if !seen[nk] && class[nk] == Some(c) {
                            seen[nk] = true;
                            stack.push(nk);
                        }
                    }
                }
            }
        }
        found.push(Singularity {
            x: sx / n as f64,
            y: sy / n as f64,
            class: c,
        });
    }
    Ok(found)
}

fn class_rank(c: SingularityClass) -> u8 {
    match c {
        SingularityClass::Whorl => 0,
        SingularityClass::Core => 1,
        SingularityClass::Delta => 2,
    }
}

/// The one detection reported per image: whorls before cores before deltas,
/// ties going to the detection nearest the centre of a `width × height` image.
pub fn primary_singularity(found: &[Singularity], height: usize, width: usize) -> Option<Singularity> {
    let centre = |s: &Singularity| (s.x - (width as f64 - 1.0) / 2.0).hypot(s.y - (height as f64 - 1.0) / 2.0);
    found
        .iter()
        .min_by(|a, b| {
            class_rank(a.class)
                .cmp(&class_rank(b.class))
                .then(centre(a).total_cmp(&centre(b)))
        })
        .copied()
}
