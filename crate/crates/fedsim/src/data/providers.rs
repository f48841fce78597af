//! Raw dataset sources: IDX (the MNIST container format) and numeric CSV.

use std::fs;
use std::path::Path;

use crate::data::DataContainer;
use crate::error::{FedError, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct BeReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> BeReader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    fn read_u32(&mut self) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(FedError::Format(format!(
                "{}: truncated header",
                self.path.display()
            )));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(FedError::Format(format!(
                "{}: expected {} data bytes, found {}",
                self.path.display(),
                n,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Loads an IDX image/label file pair (big-endian headers, unsigned pixel
/// bytes). Pixels are scaled to `[0, 1]`; the class count is inferred from
/// the labels.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DataContainer> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;

    let mut img = BeReader::new(&image_bytes, images_path);
    let magic = img.read_u32()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(FedError::Format(format!(
            "{}: bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let count = img.read_u32()? as usize;
    let rows = img.read_u32()? as usize;
    let cols = img.read_u32()? as usize;
    let dim = rows * cols;
    let pixels = img.take(count * dim)?;

    let mut lbl = BeReader::new(&label_bytes, labels_path);
    let magic = lbl.read_u32()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(FedError::Format(format!(
            "{}: bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }
    let label_count = lbl.read_u32()? as usize;
    if label_count != count {
        return Err(FedError::Format(format!(
            "image count {count} does not match label count {label_count}"
        )));
    }
    let raw_labels = lbl.take(count)?;

    let features: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(1, |&m| m + 1);
    DataContainer::new(features, dim, labels, num_classes)
}

/// Loads a numeric CSV with a header row; every column but the last is a
/// real-valued feature, the last column is an integer class label.
pub fn load_csv(path: &Path) -> Result<DataContainer> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| FedError::Format(format!("{}: {e}", path.display())))?;
    let width = reader
        .headers()
        .map_err(|e| FedError::Format(format!("{}: {e}", path.display())))?
        .len();
    if width < 2 {
        return Err(FedError::Format(format!(
            "{}: need at least one feature column and a label column",
            path.display()
        )));
    }
    let dim = width - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FedError::Format(format!("{}: {e}", path.display())))?;
        if record.len() != width {
            return Err(FedError::Format(format!(
                "{}: row {} has {} fields, expected {width}",
                path.display(),
                line + 2,
                record.len()
            )));
        }
        for field in record.iter().take(dim) {
            let v: f64 = field.trim().parse().map_err(|_| {
                FedError::Format(format!(
                    "{}: row {}: bad feature value {field:?}",
                    path.display(),
                    line + 2
                ))
            })?;
            features.push(v);
        }
        let label_field = &record[dim];
        let label: usize = label_field.trim().parse().map_err(|_| {
            FedError::Format(format!(
                "{}: row {}: bad label {label_field:?}",
                path.display(),
                line + 2
            ))
        })?;
        labels.push(label);
    }
    let num_classes = labels.iter().max().map_or(1, |&m| m + 1);
    DataContainer::new(features, dim, labels, num_classes)
}
