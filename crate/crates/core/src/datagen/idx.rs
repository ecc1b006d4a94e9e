//! Reader for the big-endian IDX container used by MNIST-style datasets.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated IDX header at byte {at}")))
}

/// Parses an IDX image file into `(rows × cols)`-wide rows scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], max_samples: usize) -> Result<(Vec<f64>, usize, usize)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let width = rows * cols;
    let take = count.min(max_samples);
    let body = &bytes[16..];
    if body.len() < count * width {
        return Err(Error::Format(format!(
            "truncated IDX image payload: {} bytes for {count} images of {width} pixels",
            body.len()
        )));
    }
    let pixels = body[..take * width]
        .iter()
        .map(|&p| p as f64 / 255.0)
        .collect();
    Ok((pixels, width, take))
}

pub fn parse_idx_labels(bytes: &[u8], max_samples: usize) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format(format!(
            "truncated IDX label payload: {} bytes for {count} labels",
            body.len()
        )));
    }
    Ok(body[..count.min(max_samples)]
        .iter()
        .map(|&l| l as usize)
        .collect())
}

/// Loads the first `max_samples` image/label pairs. The class count is one
/// past the largest label seen.
pub fn load_idx_subset(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    max_samples: usize,
) -> Result<Dataset> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    let (pixels, width, n_img) = parse_idx_images(&images, max_samples)?;
    let labels = parse_idx_labels(&labels, max_samples)?;
    if labels.len() != n_img {
        return Err(Error::Format(format!(
            "{n_img} images but {} labels",
            labels.len()
        )));
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(pixels, width, labels, classes)
}

/// Serializes images and labels back into IDX byte buffers (used for
/// fixtures and export).
pub fn encode_idx(images: &[u8], rows: u32, cols: u32, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.len());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    img.extend_from_slice(images);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
