//! IDX (big-endian) image and label files, as used by the MNIST family.
//!
//! Grayscale image files carry magic `0x00000803` with three dimensions
//! `[n, rows, cols]`. Multi-channel sets reuse the IDX convention that
//! the low magic byte counts dimensions: `0x00000804` with
//! `[n, channels, rows, cols]`. Label files carry `0x00000801`. Pixels
//! are unsigned bytes, scaled to `[0, 1]` on load.

use std::path::Path;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC_LABELS: u32 = 0x0000_0801;
const MAGIC_IMAGES_3D: u32 = 0x0000_0803;
const MAGIC_IMAGES_4D: u32 = 0x0000_0804;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &Path) -> Self {
        Reader { bytes, pos: 0, path: path.display().to_string() }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format { path: self.path.clone(), msg: msg.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err(format!(
                "truncated: wanted {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn parse_images<'a>(bytes: &'a [u8], path: &Path) -> Result<(Vec<usize>, &'a [u8])> {
    let mut r = Reader::new(bytes, path);
    let magic = r.u32_be()?;
    let ndims = match magic {
        MAGIC_IMAGES_3D => 3,
        MAGIC_IMAGES_4D => 4,
        other => {
            return Err(r.err(format!(
                "bad magic {other:#010x} for image file, expected {MAGIC_IMAGES_3D:#010x} or {MAGIC_IMAGES_4D:#010x}"
            )))
        }
    };
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(r.u32_be()? as usize);
    }
    let total: usize = dims.iter().product();
    let pixels = r.take(total)?;
    Ok((dims, pixels))
}

fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let mut r = Reader::new(bytes, path);
    let magic = r.u32_be()?;
    if magic != MAGIC_LABELS {
        return Err(r.err(format!(
            "bad magic {magic:#010x} for label file, expected {MAGIC_LABELS:#010x}"
        )));
    }
    let n = r.u32_be()? as usize;
    Ok(r.take(n)?.iter().map(|&b| b as usize).collect())
}

/// Load an IDX image/label pair into a dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let (dims, pixels) = parse_images(&image_bytes, images_path)?;
    let labels = parse_labels(&label_bytes, labels_path)?;
    let (n, c, h, w) = match dims.as_slice() {
        [n, h, w] => (*n, 1, *h, *w),
        [n, c, h, w] => (*n, *c, *h, *w),
        _ => unreachable!("dimension count fixed by magic"),
    };
    if n != labels.len() {
        return Err(Error::Format {
            path: images_path.display().to_string(),
            msg: format!("{} images but {} labels", n, labels.len()),
        });
    }
    let data = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let class_count = labels.iter().copied().max().map_or(1, |m| m + 1);
    Dataset::new(Tensor::from_parts(vec![n, c, h, w], data), labels, class_count, split)
}

/// Persist a dataset as an IDX pair, for reuse across runs. Pixels are
/// quantized to bytes.
pub fn save_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let shape = dataset.images.shape();
    let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);

    let mut img = Vec::with_capacity(16 + dataset.images.numel());
    if c == 1 {
        img.extend_from_slice(&MAGIC_IMAGES_3D.to_be_bytes());
        for d in [n, h, w] {
            img.extend_from_slice(&(d as u32).to_be_bytes());
        }
    } else {
        img.extend_from_slice(&MAGIC_IMAGES_4D.to_be_bytes());
        for d in [n, c, h, w] {
            img.extend_from_slice(&(d as u32).to_be_bytes());
        }
    }
    img.extend(dataset.images.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    std::fs::write(images_path, img)?;

    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&MAGIC_LABELS.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend(dataset.labels.iter().map(|&l| l as u8));
    std::fs::write(labels_path, lab)?;
    Ok(())
}
