//! MNIST-style IDX files: a big-endian `u32` magic, one `u32` per dimension,
//! then raw unsigned bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fl::Dataset;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated(format!("{what} header")))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let found = be_u32(bytes, 0, what)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

/// Returns `(count, rows * cols, pixels scaled to [0, 1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    check_magic(bytes, IMAGES_MAGIC, "image file")?;
    let count = be_u32(bytes, 4, "image file")? as usize;
    let rows = be_u32(bytes, 8, "image file")? as usize;
    let cols = be_u32(bytes, 12, "image file")? as usize;
    let dim = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < count * dim {
        return Err(Error::Truncated(format!(
            "image file holds {} pixel bytes, header promises {}",
            payload.len(),
            count * dim
        )));
    }
    let pixels = payload[..count * dim].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((count, dim, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC, "label file")?;
    let count = be_u32(bytes, 4, "label file")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Truncated(format!("label file holds {} labels, header promises {count}", payload.len())));
    }
    Ok(payload[..count].iter().map(|&b| b as usize).collect())
}

/// Loads an image/label file pair. The class count is one more than the
/// largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::Io(format!("{}: {e}", images_path.display())))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::Io(format!("{}: {e}", labels_path.display())))?;
    let (count, dim, pixels) = parse_idx_images(&images)?;
    let labels = parse_idx_labels(&labels)?;
    if count != labels.len() {
        return Err(Error::CountMismatch { images: count, labels: labels.len() });
    }
    if count == 0 || dim == 0 {
        return Err(Error::NoData("IDX files contain no samples".into()));
    }
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(pixels, labels, dim, num_classes)
}
