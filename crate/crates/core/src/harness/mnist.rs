//! IDX reader for MNIST-style image and label files.

use std::fs;
use std::path::Path;

use crate::bitcore::BitVector;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const DEFAULT_THRESHOLD: u8 = 128;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Parses an images blob into binarized vectors of length rows·cols.
pub fn parse_idx_images(bytes: &[u8], threshold: u8) -> Result<Vec<BitVector>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!("images magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * pixels {
        return Err(Error::Format(format!(
            "images body has {} bytes, header promises {}",
            body.len(),
            count * pixels
        )));
    }
    Ok(body[..count * pixels]
        .chunks_exact(pixels.max(1))
        .take(count)
        .map(|img| BitVector::from_bools(&img.iter().map(|&p| p >= threshold).collect::<Vec<_>>()))
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!("labels magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format(format!("labels body has {} bytes, header promises {count}", body.len())));
    }
    Ok(body[..count].to_vec())
}

/// Loads and pairs an images file with its labels file.
pub fn load_mnist_idx(images: &Path, labels: &Path, threshold: u8) -> Result<Vec<(BitVector, u8)>> {
    let imgs = parse_idx_images(&fs::read(images)?, threshold)?;
    let labs = parse_idx_labels(&fs::read(labels)?)?;
    if imgs.len() != labs.len() {
        return Err(Error::Consistency(format!("{} images but {} labels", imgs.len(), labs.len())));
    }
    Ok(imgs.into_iter().zip(labs).collect())
}

/// Serializes images in IDX layout.
pub fn encode_idx_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

/// Serializes labels in IDX layout.
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
