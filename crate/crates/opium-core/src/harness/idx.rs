//! IDX image/label container reading and writing.
//!
//! The big-endian IDX encoding is the standard distribution format for
//! MNIST-style datasets: a magic number, dimension sizes, then raw bytes.
//! Errors name the byte offset where parsing failed.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A classification dataset: one input column per sample plus its label.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    /// L x k, pixel values scaled to [0, 1].
    inputs: Matrix,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn from_parts(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.cols() != labels.len() {
            return Err(Error::InvalidParameter {
                name: "labels",
                message: format!(
                    "{} labels for {} input columns",
                    labels.len(),
                    inputs.cols()
                ),
            });
        }
        Ok(LabeledDataset { inputs, labels })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.rows()
    }

    /// Smallest class count covering every label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// One-hot target matrix (classes x k) with {0, 1} coding.
    pub fn one_hot(&self, classes: usize) -> Result<Matrix> {
        if classes == 0 {
            return Err(Error::InvalidParameter {
                name: "classes",
                message: "must be at least 1".into(),
            });
        }
        let k = self.num_samples();
        let mut targets = Matrix::zeros(classes, k.max(1));
        for (j, &label) in self.labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    message: format!("label {label} at sample {j} is outside 0..{classes}"),
                });
            }
            targets.set(label, j, 1.0);
        }
        Ok(targets)
    }

    /// New dataset keeping `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<LabeledDataset> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter {
                name: "indices",
                message: "selection must keep at least one sample".into(),
            });
        }
        let l = self.input_dim();
        let mut inputs = Matrix::zeros(l, indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for (out_j, &j) in indices.iter().enumerate() {
            if j >= self.num_samples() {
                return Err(Error::InvalidParameter {
                    name: "indices",
                    message: format!("index {j} beyond {} samples", self.num_samples()),
                });
            }
            for i in 0..l {
                inputs.set(i, out_j, self.inputs.get(i, j));
            }
            labels.push(self.labels[j]);
        }
        LabeledDataset::from_parts(inputs, labels)
    }
}

fn parse_err(path: &Path, position: u64, message: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        unit: "byte",
        position,
        message,
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(parse_err(
            path,
            bytes.len() as u64,
            format!("file truncated: 4-byte field at offset {offset} needs {end} bytes"),
        ));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

struct RawImages {
    count: usize,
    pixels_per_image: usize,
    payload_offset: usize,
    bytes: Vec<u8>,
}

fn read_images(path: &Path) -> Result<RawImages> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(parse_err(
            path,
            0,
            format!("bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"),
        ));
    }
    let count = be_u32(&bytes, 4, path)? as u64;
    let rows = be_u32(&bytes, 8, path)? as u64;
    let cols = be_u32(&bytes, 12, path)? as u64;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(parse_err(
            path,
            4,
            format!("empty dimensions {count}x{rows}x{cols}"),
        ));
    }
    let expected = 16u64
        .checked_add(
            count
                .checked_mul(rows)
                .and_then(|v| v.checked_mul(cols))
                .ok_or_else(|| parse_err(path, 4, "dimension product overflows".into()))?,
        )
        .ok_or_else(|| parse_err(path, 4, "dimension product overflows".into()))?;
    if (bytes.len() as u64) != expected {
        return Err(parse_err(
            path,
            bytes.len().min(expected as usize) as u64,
            format!(
                "payload length mismatch: header promises {expected} bytes total, file has {}",
                bytes.len()
            ),
        ));
    }
    Ok(RawImages {
        count: count as usize,
        pixels_per_image: (rows * cols) as usize,
        payload_offset: 16,
        bytes,
    })
}

fn read_labels(path: &Path) -> Result<(usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(parse_err(
            path,
            0,
            format!("bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"),
        ));
    }
    let count = be_u32(&bytes, 4, path)? as u64;
    if count == 0 {
        return Err(parse_err(path, 4, "label count is zero".into()));
    }
    let expected = 8 + count;
    if (bytes.len() as u64) != expected {
        return Err(parse_err(
            path,
            bytes.len().min(expected as usize) as u64,
            format!(
                "payload length mismatch: header promises {expected} bytes total, file has {}",
                bytes.len()
            ),
        ));
    }
    Ok((count as usize, bytes))
}

/// Loads an image file and its label file into a dataset.
///
/// Pixels are scaled to [0, 1] by dividing by 255; the image count must
/// match the label count.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = read_images(images_path)?;
    let (label_count, label_bytes) = read_labels(labels_path)?;
    if label_count != images.count {
        return Err(parse_err(
            labels_path,
            4,
            format!(
                "label count {label_count} does not match image count {}",
                images.count
            ),
        ));
    }
    let l = images.pixels_per_image;
    let k = images.count;
    let mut inputs = Matrix::zeros(l, k);
    for j in 0..k {
        let start = images.payload_offset + j * l;
        for i in 0..l {
            inputs.set(i, j, images.bytes[start + i] as f64 / 255.0);
        }
    }
    let labels: Vec<usize> = label_bytes[8..].iter().map(|&b| b as usize).collect();
    LabeledDataset::from_parts(inputs, labels)
}

/// Writes images (each `rows * cols` raw bytes) in IDX format.
pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: u32, cols: u32) -> Result<()> {
    let pixels = (rows as usize) * (cols as usize);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter {
            name: "shape",
            message: format!("image shape {rows}x{cols} must be nonzero"),
        });
    }
    for (j, img) in images.iter().enumerate() {
        if img.len() != pixels {
            return Err(Error::InvalidParameter {
                name: "images",
                message: format!("image {j} has {} bytes, expected {pixels}", img.len()),
            });
        }
    }
    let mut out = Vec::with_capacity(16 + images.len() * pixels);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    for img in images {
        out.extend_from_slice(img);
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes labels (one byte each) in IDX format.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pair(dir: &Path, images: &[Vec<u8>], labels: &[u8], rows: u32, cols: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let img_path = dir.join("images.idx");
        let lbl_path = dir.join("labels.idx");
        write_idx_images(&img_path, images, rows, cols).unwrap();
        write_idx_labels(&lbl_path, labels).unwrap();
        (img_path, lbl_path)
    }

    #[test]
    fn round_trip_two_tiny_images() {
        // Header 00 00 08 03 with dims 2,2,2 describes 2 images of 4 pixels.
        let dir = tempfile::tempdir().unwrap();
        let images = vec![vec![0u8, 128, 255, 64], vec![10, 20, 30, 40]];
        let (img, lbl) = write_pair(dir.path(), &images, &[3, 7], 2, 2);
        let raw = fs::read(&img).unwrap();
        assert_eq!(&raw[..4], &[0, 0, 8, 3]);
        assert_eq!(raw.len(), 16 + 8);

        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.num_samples(), 2);
        assert_eq!(ds.input_dim(), 4);
        assert_eq!(ds.labels(), &[3, 7]);
        assert_eq!(ds.inputs().get(0, 0), 0.0);
        assert_eq!(ds.inputs().get(2, 0), 1.0);
        assert!((ds.inputs().get(1, 0) - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn bad_magic_is_reported_at_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("bad.idx");
        fs::write(&img, [0u8, 0, 9, 9, 0, 0, 0, 1]).unwrap();
        let lbl = dir.path().join("labels.idx");
        write_idx_labels(&lbl, &[0]).unwrap();
        let err = load_idx(&img, &lbl).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("byte 0") && msg.contains("magic"), "message: {msg}");
    }

    #[test]
    fn truncated_payload_is_reported_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("short.idx");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&[1, 2, 3]);
        fs::write(&img, bytes).unwrap();
        let lbl = dir.path().join("labels.idx");
        write_idx_labels(&lbl, &[0, 1]).unwrap();
        let err = load_idx(&img, &lbl).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mismatch"), "message: {msg}");
    }

    #[test]
    fn count_mismatch_between_files_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![vec![0u8; 4]; 3];
        let (img, lbl) = write_pair(dir.path(), &images, &[0, 1], 2, 2);
        let err = load_idx(&img, &lbl).unwrap_err();
        assert!(err.to_string().contains("does not match image count 3"));
    }

    #[test]
    fn truncated_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("tiny.idx");
        fs::write(&img, [0u8, 0]).unwrap();
        let lbl = dir.path().join("labels.idx");
        write_idx_labels(&lbl, &[0]).unwrap();
        let err = load_idx(&img, &lbl).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn one_hot_encodes_unit_columns() {
        let inputs = Matrix::zeros(2, 3);
        let ds = LabeledDataset::from_parts(inputs, vec![0, 2, 1]).unwrap();
        let t = ds.one_hot(3).unwrap();
        assert_eq!(t.shape(), (3, 3));
        assert_eq!(t.get(0, 0), 1.0);
        assert_eq!(t.get(2, 1), 1.0);
        assert_eq!(t.get(1, 2), 1.0);
        let total: f64 = t.data().iter().sum();
        assert_eq!(total, 3.0);
        assert!(ds.one_hot(2).is_err());
    }

    #[test]
    fn select_reorders_samples() {
        let mut inputs = Matrix::zeros(2, 3);
        for j in 0..3 {
            inputs.set(0, j, j as f64);
        }
        let ds = LabeledDataset::from_parts(inputs, vec![5, 6, 7]).unwrap();
        let picked = ds.select(&[2, 0]).unwrap();
        assert_eq!(picked.labels(), &[7, 5]);
        assert_eq!(picked.inputs().get(0, 0), 2.0);
        assert_eq!(picked.inputs().get(0, 1), 0.0);
        assert!(ds.select(&[9]).is_err());
        assert!(ds.select(&[]).is_err());
    }
}
