//! IDX binary loader (the MNIST distribution format).
//!
//! Images: magic 0x00000803, then count, rows, cols as big-endian u32,
//! then one unsigned byte per pixel. Labels: magic 0x00000801, count,
//! one byte per label. Pixels are scaled to `[0, 1]` by dividing by 255.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Dense2D;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        location: format!("byte offset {offset}"),
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(parse_err(
            path,
            bytes.len(),
            format!("file truncated, needed {end} header bytes"),
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load an IDX image/label file pair into a dataset with `rows * cols`
/// features per image.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = read_file(images_path)?;
    let magic = read_u32_be(&image_bytes, 0, images_path)?;
    if magic != IMAGES_MAGIC {
        return Err(parse_err(
            images_path,
            0,
            format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = read_u32_be(&image_bytes, 4, images_path)? as usize;
    let height = read_u32_be(&image_bytes, 8, images_path)? as usize;
    let width = read_u32_be(&image_bytes, 12, images_path)? as usize;
    let d = height * width;
    let expected = 16 + n * d;
    if image_bytes.len() < expected {
        return Err(parse_err(
            images_path,
            image_bytes.len(),
            format!(
                "file truncated: {} images of {d} pixels need {expected} bytes",
                n
            ),
        ));
    }

    let label_bytes = read_file(labels_path)?;
    let magic = read_u32_be(&label_bytes, 0, labels_path)?;
    if magic != LABELS_MAGIC {
        return Err(parse_err(
            labels_path,
            0,
            format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let n_labels = read_u32_be(&label_bytes, 4, labels_path)? as usize;
    if n_labels != n {
        return Err(parse_err(
            labels_path,
            4,
            format!("{n_labels} labels against {n} images"),
        ));
    }
    if label_bytes.len() < 8 + n {
        return Err(parse_err(
            labels_path,
            label_bytes.len(),
            format!("file truncated: {n} labels need {} bytes", 8 + n),
        ));
    }

    let pixels: Vec<f64> = image_bytes[16..16 + n * d]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let y: Vec<usize> = label_bytes[8..8 + n].iter().map(|&b| b as usize).collect();
    Dataset::new(Dense2D::from_vec(n, d, pixels)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_images(n: u32, h: u32, w: u32, pixels: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&n.to_be_bytes()).unwrap();
        f.write_all(&h.to_be_bytes()).unwrap();
        f.write_all(&w.to_be_bytes()).unwrap();
        f.write_all(pixels).unwrap();
        f
    }

    fn write_labels(labels: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
        f
    }

    #[test]
    fn hand_built_fixture_round_trips_exact_pixels() {
        // Two 2x2 images with known bytes.
        let imgs = write_images(2, 2, 2, &[0, 51, 102, 255, 255, 204, 153, 0]);
        let labels = write_labels(&[1, 0]);
        let ds = load_idx(imgs.path(), labels.path()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.feature_count(), 4);
        assert_eq!(ds.class_count(), 2);
        assert_eq!(
            ds.x().row(0),
            &[0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0]
        );
        assert_eq!(
            ds.x().row(1),
            &[1.0, 204.0 / 255.0, 153.0 / 255.0, 0.0]
        );
        assert_eq!(ds.y(), &[1, 0]);
    }

    #[test]
    fn label_count_mismatch_is_an_error() {
        let imgs = write_images(2, 2, 2, &[0; 8]);
        let labels = write_labels(&[1, 0, 1]);
        let err = load_idx(imgs.path(), labels.path()).unwrap_err();
        assert!(err.to_string().contains("3 labels against 2 images"), "{err}");
    }

    #[test]
    fn bad_magic_reports_offset() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(&0xdead_beef_u32.to_be_bytes()).unwrap();
        f.write_all(&[0; 12]).unwrap();
        let labels = write_labels(&[0]);
        let err = load_idx(f.path(), labels.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("byte offset 0") && msg.contains("bad magic"), "{msg}");
    }

    #[test]
    fn truncated_images_report_offset() {
        let imgs = write_images(3, 2, 2, &[0; 5]); // needs 12 pixel bytes
        let labels = write_labels(&[0, 1, 0]);
        let err = load_idx(imgs.path(), labels.path()).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }
}
