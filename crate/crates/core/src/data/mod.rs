//! Datasets: annotated grayscale images, the `ground_truth.csv` manifest,
//! bilinear resizing and a synthetic fingerprint generator.

mod dataset;
mod image_io;
mod manifest;
mod resize;
mod synth;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

pub use dataset::{
    is_supported_image, list_images, load_dataset, write_dataset, LoadedDataset, IMAGE_DIR, MANIFEST_NAME,
};
pub use image_io::{read_gray, write_gray_png};
pub use manifest::{Manifest, ManifestEntry};
pub use resize::{resize_bilinear, ScaleFactors, MIN_RESIZE_SIDE};
pub use synth::{synth_fingerprint, whorl_corpus, PatternKind, SyntheticParams, MIN_WAVELENGTH};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("cannot read image {path}: {reason}")]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("manifest row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("invalid resize target {height}×{width}")]
    InvalidTarget { height: usize, width: usize },
    #[error("annotation ({x}, {y}) outside a {width}×{height} image")]
    AnnotationOutOfBounds { x: f64, y: f64, width: usize, height: usize },
    #[error("I/O: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A pixel position; x grows rightward and y downward from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }

    /// Whether the point lies in `[0, width) × [0, height)`.
    pub fn inside(self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x < width as f64 && self.y < height as f64
    }
}

/// One grayscale image with its optional singular-point annotation.
///
/// The annotation is kept in original-image pixels; `image` may have been
/// resized, in which case `scale` maps original coordinates onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `1×1×H×W`, values in `[0, 1]`.
    pub image: Tensor,
    pub annotation: Option<Point>,
    /// `(H0, W0)`.
    pub original_size: (usize, usize),
    pub scale: ScaleFactors,
}

impl Sample {
    /// Wraps an image at its original resolution.
    pub fn new(id: impl Into<String>, image: Tensor, annotation: Option<Point>) -> Result<Self, DataError> {
        let [n, c, h, w] = image.dims4()?;
        if (n, c) != (1, 1) {
            return Err(TensorError::InvalidShape(format!("sample image must be 1×1×H×W, got {:?}", image.shape())).into());
        }
        if let Some(p) = annotation {
            if !p.inside(w, h) {
                return Err(DataError::AnnotationOutOfBounds {
                    x: p.x,
                    y: p.y,
                    width: w,
                    height: h,
                });
            }
        }
        Ok(Self {
            id: id.into(),
            image,
            annotation,
            original_size: (h, w),
            scale: ScaleFactors::IDENTITY,
        })
    }

    pub fn height(&self) -> usize {
        self.image.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[3]
    }

    /// Resamples the image from its original resolution; the annotation stays in original pixels.
    pub fn resized(&self, height: usize, width: usize) -> Result<Self, DataError> {
        if self.scale != ScaleFactors::IDENTITY {
            return Err(DataError::InvalidTarget { height, width });
        }
        let (image, scale) = resize_bilinear(&self.image, height, width)?;
        Ok(Self {
            image,
            scale,
            ..self.clone()
        })
    }

    /// The annotation in the coordinates of `image`, clamped onto its pixel grid.
    pub fn input_annotation(&self) -> Option<Point> {
        let (h, w) = (self.height() as f64, self.width() as f64);
        self.annotation.map(|p| {
            let q = self.scale.to_input(p);
            Point::new(q.x.clamp(0.0, w - 1.0), q.y.clamp(0.0, h - 1.0))
        })
    }

    /// Maps a point in `image` coordinates back to original pixels.
    pub fn to_original(&self, p: Point) -> Point {
        let (h0, w0) = (self.original_size.0 as f64, self.original_size.1 as f64);
        let q = self.scale.to_original(p);
        Point::new(q.x.clamp(0.0, w0 - 1.0), q.y.clamp(0.0, h0 - 1.0))
    }
}
