//! Datasets, binary loaders, augmentation, and the balanced sampler.

pub mod augment;
pub mod cifar;
pub mod fuzzy;
pub mod idx;
pub mod sampler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// An in-memory dataset: images as one `[n, c, h, w]` tensor with values
/// in `[0, 1]`, plus aligned class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        images: Tensor,
        labels: Vec<usize>,
        class_count: usize,
        split: Split,
    ) -> Result<Dataset> {
        if images.shape().len() != 4 {
            return Err(Error::Domain {
                op: "dataset",
                msg: format!("images must be [n, c, h, w], got {:?}", images.shape()),
            });
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::Domain {
                op: "dataset",
                msg: format!(
                    "{} images but {} labels",
                    images.shape()[0],
                    labels.len()
                ),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange { label: bad, classes: class_count });
        }
        Ok(Dataset { images, labels, class_count, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Flat pixel count per image.
    pub fn image_numel(&self) -> usize {
        self.images.shape()[1..].iter().product()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let sz = self.image_numel();
        &self.images.data()[i * sz..(i + 1) * sz]
    }

    /// Extract the images and labels at `indices` into a fresh batch.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let shape = self.images.shape();
        let sz = self.image_numel();
        let mut data = Vec::with_capacity(indices.len() * sz);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        let batch_shape = vec![indices.len(), shape[1], shape[2], shape[3]];
        (Tensor::from_parts(batch_shape, data), labels)
    }

    /// Number of samples per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}
