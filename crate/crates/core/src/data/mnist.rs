//! IDX ingestion for MNIST-style files.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! images: u32 magic = 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols u8 pixels
//! labels: u32 magic = 0x00000801, u32 count, count u8 labels
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::dataset::Dataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: offset + 4,
            found: bytes.len(),
        })
}

/// Parses an image file; returns `(count, rows, cols, pixels scaled to [0, 1])`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::MagicMismatch {
            path: path.to_path_buf(),
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let payload = count * rows * cols;
    if bytes.len() < 16 + payload {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: 16 + payload,
            found: bytes.len(),
        });
    }
    let pixels = bytes[16..16 + payload].iter().map(|&b| b as f64 / 255.0).collect();
    Ok((count, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u32>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::MagicMismatch {
            path: path.to_path_buf(),
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, path)? as usize;
    if bytes.len() < 8 + count {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: 8 + count,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..8 + count].iter().map(|&b| b as u32).collect())
}

/// Loads an image/label file pair into an `n x (rows*cols)` dataset.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let img_bytes = fs::read(ip)?;
    let lab_bytes = fs::read(lp)?;
    let (count, rows, cols, pixels) = parse_idx_images(&img_bytes, ip)?;
    let labels = parse_idx_labels(&lab_bytes, lp)?;
    if labels.len() != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Dataset::new(Tensor::matrix(count, rows * cols, pixels), "mnist", None)?.with_labels(labels)
}

/// Writes images in IDX format; pixel values are rounded from `[0, 1]` to bytes.
pub fn write_idx_images<W: Write>(mut w: W, rows: usize, cols: usize, images: &Tensor) -> Result<()> {
    if images.cols() != rows * cols {
        return Err(Error::shape("write_idx_images", rows * cols, images.cols()));
    }
    w.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for v in [images.rows(), rows, cols] {
        w.write_all(&(v as u32).to_be_bytes())?;
    }
    let bytes: Vec<u8> = images
        .data()
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn write_idx_labels<W: Write>(mut w: W, labels: &[u32]) -> Result<()> {
    w.write_all(&LABELS_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    let bytes: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}
