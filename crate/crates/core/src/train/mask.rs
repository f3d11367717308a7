use super::TrainError;
use crate::data::Point;
use crate::tensor::Tensor;

/// Binary `1×1×H×W` target: ones on the square of Chebyshev radius
/// `half_width` around `coord` (rounded to the nearest pixel), clipped at the borders.
pub fn make_gt_mask(coord: Point, height: usize, width: usize, half_width: usize) -> Result<Tensor, TrainError> {
    if !coord.inside(width, height) {
        return Err(TrainError::InvalidAnnotation {
            x: coord.x,
            y: coord.y,
            width,
            height,
        });
    }
    let cx = (coord.x.round() as usize).min(width - 1);
    let cy = (coord.y.round() as usize).min(height - 1);
    let (x0, x1) = (cx.saturating_sub(half_width), (cx + half_width).min(width - 1));
    let (y0, y1) = (cy.saturating_sub(half_width), (cy + half_width).min(height - 1));
    let mut mask = Tensor::zeros(&[1, 1, height, width]);
    let d = mask.data_mut();
    for y in y0..=y1 {
        d[y * width + x0..=y * width + x1].fill(1.0);
    }
    Ok(mask)
}
