//! MNIST IDX files: big-endian headers followed by raw `u8` payloads.
//!
//! Images (`0x00000803`): count, rows, columns, then `count * rows * cols`
//! pixels, row-major. Labels (`0x00000801`): count, then one byte each.

use std::fs;
use std::path::{Path, PathBuf};

use neurocrn_core::training::Dataset;

use crate::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Idx {
            path: self.path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.err(self.pos, format!("truncated while reading {what}")))?;
        let v = u32::from_be_bytes(chunk.try_into().expect("4 bytes"));
        self.pos = end;
        Ok(v)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let m = self.u32("magic number")?;
        if m != expected {
            return Err(self.err(0, format!("bad magic {m:#010x}, expected {expected:#010x}")));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .ok_or_else(|| self.err(self.pos, "payload size overflows"))?;
        if end > self.bytes.len() {
            return Err(self.err(
                self.bytes.len(),
                format!(
                    "truncated payload: need {len} bytes from offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            ));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        if end != self.bytes.len() {
            return Err(self.err(end, format!("{} trailing bytes", self.bytes.len() - end)));
        }
        Ok(out)
    }
}

pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<IdxImages> {
    let mut r = Reader { path, bytes, pos: 0 };
    r.magic(IMAGES_MAGIC)?;
    let count = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let pixels = r.payload(count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { path, bytes, pos: 0 };
    r.magic(LABELS_MAGIC)?;
    let count = r.u32("label count")? as usize;
    let labels = r.payload(count)?.to_vec();
    if let Some(k) = labels.iter().position(|l| *l > 9) {
        return Err(r.err(8 + k, format!("label {} out of range 0..=9", labels[k])));
    }
    Ok(labels)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Load an image/label pair, scaling pixels to `[0, 1]` by `/ 255`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = parse_images(images_path, &read(images_path)?)?;
    let labels = parse_labels(labels_path, &read(labels_path)?)?;
    if images.count != labels.len() {
        return Err(Error::Idx {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!("{} labels for {} images", labels.len(), images.count),
        });
    }
    let dim = images.rows * images.cols;
    let pixels = images.pixels.iter().map(|p| f64::from(*p) / 255.0).collect();
    Ok(Dataset::new(pixels, labels, dim)?)
}

/// Paths of the training pair inside an MNIST directory.
pub fn training_files(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(TRAIN_IMAGES), dir.join(TRAIN_LABELS))
}

/// Serialize images in IDX form; used for fixtures and round trips.
pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
