use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};

use super::DataError;
use crate::tensor::Tensor;

/// Decodes a PNG or PGM file into a `1×1×H×W` tensor scaled to `[0, 1]`.
pub fn read_gray(path: impl AsRef<Path>) -> Result<Tensor, DataError> {
    let path = path.as_ref();
    let unreadable = |reason: String| DataError::UnreadableImage {
        path: path.to_owned(),
        reason,
    };
    let format = match ImageFormat::from_path(path) {
        Ok(f @ (ImageFormat::Png | ImageFormat::Pnm)) => f,
        _ => return Err(unreadable("only PNG and PGM images are supported".into())),
    };
    let reader = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| unreadable(e.to_string()))?);
    let img = image::load(reader, format).map_err(|e| unreadable(e.to_string()))?.into_luma8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Ok(Tensor::from_vec(&[1, 1, h as usize, w as usize], data)?)
}

/// Writes the first plane of an image tensor as an 8-bit PNG, clamping to `[0, 1]`.
pub fn write_gray_png(path: impl AsRef<Path>, image: &Tensor) -> Result<(), DataError> {
    let [_, _, h, w] = image.dims4()?;
    let plane = &image.data()[..h * w];
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = plane[y as usize * w + x as usize];
        Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save_with_format(path.as_ref(), ImageFormat::Png)
        .map_err(|e| DataError::UnreadableImage {
            path: path.as_ref().to_owned(),
            reason: e.to_string(),
        })
}
