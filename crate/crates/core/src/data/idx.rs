//! IDX (MNIST) reader and writer. Images: magic `0x00000803`, dimensions
//! `n × rows × cols`, unsigned bytes. Labels: magic `0x00000801`, `n` bytes.
//! All header fields are big-endian `u32`.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Returns `(rows, cols, pixels)` with one `rows·cols` block per image.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = read_all(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            path,
            format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = n * rows * cols;
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "truncated or oversized image data: {} bytes, header implies {expected}",
                body.len()
            ),
        ));
    }
    Ok((rows, cols, body.to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_all(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            path,
            format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(
            path,
            format!("label data has {} bytes, header says {n}", body.len()),
        ));
    }
    Ok(body.to_vec())
}

/// Loads an image/label pair, scaling pixels to `[0, 1]`. The number of
/// classes is `max(label) + 1` unless `num_classes` overrides it. Rows arrive
/// in file order.
pub fn load_idx(images: &Path, labels: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let (rows, cols, pixels) = read_idx_images(images)?;
    let raw_labels = read_idx_labels(labels)?;
    let dim = rows * cols;
    let n = pixels.len().checked_div(dim).unwrap_or(0);
    if n != raw_labels.len() {
        return Err(Error::format(
            labels,
            format!(
                "{} labels but {} holds {n} images",
                raw_labels.len(),
                images.display()
            ),
        ));
    }
    let labels_vec: Vec<usize> = raw_labels.iter().map(|&y| y as usize).collect();
    let q = num_classes.unwrap_or_else(|| labels_vec.iter().max().map_or(0, |m| m + 1));
    let features = Matrix::from_vec(n, dim, pixels.iter().map(|&p| p as f64 / 255.0).collect())?;
    Dataset::new(features, labels_vec, q, (0..n).collect())
}

/// Writes `dataset` as `n × 1 × d` images in arrival order, so that reading
/// the files back yields the same arrival sequence. Features must lie in
/// `[0, 1]`; they are stored as `round(255·v)`.
pub fn write_idx(dataset: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let n = dataset.len();
    let d = dataset.feature_dim();
    if dataset.num_classes > 256 {
        return Err(Error::InvalidArgument("IDX labels are single bytes".into()));
    }
    let mut img = Vec::with_capacity(16 + n * d);
    for v in [IMAGES_MAGIC, n as u32, 1, d as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    let mut lab = Vec::with_capacity(8 + n);
    for v in [LABELS_MAGIC, n as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    for &i in &dataset.time_order {
        for &v in dataset.features.row(i) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "feature {v} outside [0, 1]"
                )));
            }
            img.push((v * 255.0).round() as u8);
        }
        lab.push(dataset.labels[i] as u8);
    }
    fs::write(images, img).map_err(|e| Error::io(images, e))?;
    fs::write(labels, lab).map_err(|e| Error::io(labels, e))?;
    Ok(())
}

/// Affinely maps all features into `[0, 1]` using the global min and max.
pub fn quantize_unit(dataset: &Dataset) -> Dataset {
    quantize_jointly(std::slice::from_ref(dataset))
        .pop()
        .expect("one dataset in, one out")
}

/// Like `quantize_unit`, with one min-max map shared by all `datasets`.
pub fn quantize_jointly(datasets: &[Dataset]) -> Vec<Dataset> {
    let vals = || {
        datasets
            .iter()
            .flat_map(|d| d.features.as_slice().iter().copied())
    };
    let lo = vals().fold(f64::INFINITY, f64::min);
    let hi = vals().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    datasets
        .iter()
        .map(|d| Dataset {
            features: d.features.map(|v| ((v - lo) / span).clamp(0.0, 1.0)),
            ..d.clone()
        })
        .collect()
}
