//! Class-balanced batch sampler.
//!
//! Each batch draws a fixed per-class quota (the batch size dealt
//! round-robin over the classes), so every class is represented by at
//! least two instances in every batch. Per-class index streams are
//! shuffled once per epoch and consumed circularly: a class that runs
//! out early rewraps within the epoch.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Split `batch_size` slots over `class_count` classes, dealing the
/// remainder to the lowest class indices.
pub fn class_quotas(batch_size: usize, class_count: usize) -> Vec<usize> {
    let base = batch_size / class_count;
    let extra = batch_size % class_count;
    (0..class_count).map(|j| base + usize::from(j < extra)).collect()
}

/// One epoch of balanced batches, as index lists into the dataset.
pub fn balanced_batches(
    dataset: &Dataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    let k = dataset.class_count;
    if batch_size < 2 * k {
        return Err(Error::Config(format!(
            "batch size {batch_size} is too small for {k} classes; need at least {}",
            2 * k
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut streams: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in dataset.labels.iter().enumerate() {
        streams[l].push(i);
    }
    if let Some(j) = streams.iter().position(Vec::is_empty) {
        return Err(Error::Domain {
            op: "balanced_batches",
            msg: format!("class {j} has no samples"),
        });
    }
    for s in &mut streams {
        s.shuffle(rng);
    }

    let quotas = class_quotas(batch_size, k);
    let num_batches = (dataset.len() / batch_size).max(1);
    let mut cursors = vec![0usize; k];
    let mut batches = Vec::with_capacity(num_batches);
    for _ in 0..num_batches {
        let mut batch = Vec::with_capacity(batch_size);
        for j in 0..k {
            for _ in 0..quotas[j] {
                batch.push(streams[j][cursors[j] % streams[j].len()]);
                cursors[j] += 1;
            }
        }
        batches.push(batch);
    }
    Ok(batches)
}
