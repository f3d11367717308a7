use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use super::manifest::{Manifest, ManifestEntry};
use super::{read_gray, write_gray_png, DataError, Sample};

pub const IMAGE_DIR: &str = "images";
pub const MANIFEST_NAME: &str = "ground_truth.csv";

/// Result of [`load_dataset`]: the readable samples, sorted by id, and the files that were skipped.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub samples: Vec<Sample>,
    pub skipped: Vec<(PathBuf, String)>,
}

/// PNG or PGM, judged by extension.
pub fn is_supported_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pgm"))
}

/// Lists `images/*.png|*.pgm` under `dir`, sorted by filename.
pub(crate) fn image_files(dir: &Path) -> Result<Vec<String>, DataError> {
    list_images(&dir.join(IMAGE_DIR))
}

/// Filenames of the supported images directly inside `dir`, sorted.
pub fn list_images(dir: &Path) -> Result<Vec<String>, DataError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && is_supported_image(&path) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_owned());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Loads `dir/images/*` and attaches annotations from `dir/ground_truth.csv`.
///
/// Images that fail to decode are skipped with a warning; images without a
/// manifest row, or with an explicit empty row, carry no annotation.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<LoadedDataset, DataError> {
    let dir = dir.as_ref();
    let manifest = Manifest::read(dir.join(MANIFEST_NAME))?;
    let files = image_files(dir)?;
    for (i, (name, _)) in manifest.iter().enumerate() {
        if files.binary_search_by(|f| f.as_str().cmp(name)).is_err() {
            return Err(DataError::MalformedRow {
                row: i + 2,
                reason: format!("no image {name} in {}", dir.join(IMAGE_DIR).display()),
            });
        }
    }
    let mut samples = Vec::with_capacity(files.len());
    let mut skipped = Vec::new();
    for name in files {
        let path = dir.join(IMAGE_DIR).join(&name);
        let image = match read_gray(&path) {
            Ok(t) => t,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                skipped.push((path, e.to_string()));
                continue;
            }
        };
        let annotation = manifest.get(&name).and_then(ManifestEntry::point);
        let row = manifest.iter().position(|(n, _)| n == name).map_or(0, |i| i + 2);
        let sample = Sample::new(name, image, annotation).map_err(|e| match e {
            DataError::AnnotationOutOfBounds { .. } => DataError::MalformedRow { row, reason: e.to_string() },
            other => other,
        })?;
        samples.push(sample);
    }
    if !skipped.is_empty() {
        warn!("{} unreadable image(s) skipped", skipped.len());
    }
    Ok(LoadedDataset { samples, skipped })
}

/// Writes samples as `dir/images/<id>` PNGs plus a manifest row for each.
///
/// Sample ids are used as filenames and should end in `.png`.
pub fn write_dataset(dir: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DataError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join(IMAGE_DIR))?;
    let mut manifest = Manifest::new();
    for s in samples {
        write_gray_png(dir.join(IMAGE_DIR).join(&s.id), &s.image)?;
        let entry = s.annotation.map_or(ManifestEntry::NoSingularPoint, ManifestEntry::Point);
        manifest.set(s.id.clone(), entry);
    }
    manifest.write_atomic(dir.join(MANIFEST_NAME))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Point;
    use crate::tensor::Tensor;

    fn gray(h: usize, w: usize, v: f32) -> Tensor {
        Tensor::full(&[1, 1, h, w], v)
    }

    fn write_images(dir: &Path, names: &[&str]) {
        fs::create_dir_all(dir.join(IMAGE_DIR)).unwrap();
        for n in names {
            write_gray_png(dir.join(IMAGE_DIR).join(n), &gray(10, 12, 0.5)).unwrap();
        }
    }

    #[test]
    fn three_annotated_images() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), &["a.png", "b.png", "c.png"]);
        fs::write(dir.path().join(MANIFEST_NAME), "filename,x,y\na.png,1,2\nb.png,3,4\nc.png,5,6\n").unwrap();
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.samples.len(), 3);
        assert!(d.skipped.is_empty());
        assert_eq!(d.samples[1].annotation, Some(Point::new(3.0, 4.0)));
        assert_eq!(d.samples[1].original_size, (10, 12));
        assert!(d.samples.iter().all(|s| s.image.data().iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn row_for_missing_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), &["a.png"]);
        fs::write(dir.path().join(MANIFEST_NAME), "filename,x,y\na.png,1,2\nz.png,3,4\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MalformedRow { row: 3, .. })));
    }

    #[test]
    fn out_of_bounds_annotation_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), &["a.png"]);
        fs::write(dir.path().join(MANIFEST_NAME), "filename,x,y\na.png,12,2\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MalformedRow { row: 2, .. })));
    }

    #[test]
    fn unlisted_image_is_unannotated_and_garbage_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), &["a.png", "b.png"]);
        fs::write(dir.path().join(IMAGE_DIR).join("broken.png"), b"junk").unwrap();
        fs::write(dir.path().join(IMAGE_DIR).join("notes.txt"), b"ignored").unwrap();
        fs::write(dir.path().join(MANIFEST_NAME), "filename,x,y\na.png,1,2\n").unwrap();
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.samples.len(), 2);
        assert_eq!(d.samples[1].annotation, None);
        assert_eq!(d.skipped.len(), 1);
    }

    #[test]
    fn missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write_images(dir.path(), &["a.png"]);
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MissingManifest(_))));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            Sample::new("x.png", gray(9, 9, 1.0), Some(Point::new(4.0, 4.5))).unwrap(),
            Sample::new("y.png", gray(9, 9, 0.0), None).unwrap(),
        ];
        write_dataset(dir.path(), &samples).unwrap();
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.samples, samples);
    }
}
