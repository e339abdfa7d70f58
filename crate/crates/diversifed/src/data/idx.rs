//! IDX binary format loader (MNIST-family files): big-endian headers,
//! magic 0x00000803 for image tensors and 0x00000801 for label vectors.

use super::LabeledDataset;
use crate::error::{Error, Result};
use std::path::Path;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader {
    bytes: Vec<u8>,
    pos: usize,
    path: String,
}

impl Reader {
    fn open(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Reader {
            bytes,
            pos: 0,
            path: path.display().to_string(),
        })
    }

    fn read_u32_be(&mut self) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::Dataset(format!(
                "{}: truncated header at byte {}",
                self.path, self.pos
            )));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn rest(&self) -> &[u8] {
        &self.bytes[self.pos..]
    }
}

fn read_images(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut r = Reader::open(path)?;
    let magic = r.read_u32_be()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Dataset(format!(
            "{}: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x} (images)",
            r.path
        )));
    }
    let count = r.read_u32_be()? as usize;
    let rows = r.read_u32_be()? as usize;
    let cols = r.read_u32_be()? as usize;
    let expected = count * rows * cols;
    let data = r.rest();
    if data.len() < expected {
        return Err(Error::Dataset(format!(
            "{}: truncated image data, expected {expected} bytes, got {}",
            r.path,
            data.len()
        )));
    }
    let pixels = data[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Ok((pixels, count, rows * cols))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut r = Reader::open(path)?;
    let magic = r.read_u32_be()?;
    if magic != LABELS_MAGIC {
        return Err(Error::Dataset(format!(
            "{}: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x} (labels)",
            r.path
        )));
    }
    let count = r.read_u32_be()? as usize;
    let data = r.rest();
    if data.len() < count {
        return Err(Error::Dataset(format!(
            "{}: truncated label data, expected {count} bytes, got {}",
            r.path,
            data.len()
        )));
    }
    Ok(data[..count].iter().map(|&b| b as usize).collect())
}

/// Load an images/labels file pair into one dataset. Pixels are scaled to
/// `[0, 1]`; the class count is taken from the largest label seen.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let (pixels, count, feature_dim) = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    if labels.len() != count {
        return Err(Error::Dataset(format!(
            "{} has {count} images but {} has {} labels",
            images_path.display(),
            labels_path.display(),
            labels.len()
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if num_classes == 0 {
        return Err(Error::Dataset(format!(
            "{}: empty label file",
            labels_path.display()
        )));
    }
    LabeledDataset::new(pixels, feature_dim, labels, num_classes)
}

/// Load a train pair plus its published test pair into one pool with a
/// designated test region.
pub fn load_idx_with_test(
    train_images: &Path,
    train_labels: &Path,
    test_images: &Path,
    test_labels: &Path,
) -> Result<LabeledDataset> {
    let train = load_idx(train_images, train_labels)?;
    let test = load_idx(test_images, test_labels)?;
    LabeledDataset::with_test_split(train, test)
}
