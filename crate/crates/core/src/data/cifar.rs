//! CIFAR-10 binary archive loader: 3073-byte records of one label byte
//! followed by 3072 channel-major pixel bytes.

use std::path::Path;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const RECORD_BYTES: usize = 3073;
const IMAGE_BYTES: usize = 3072;
const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

fn load_records(path: &Path, data: &mut Vec<f64>, labels: &mut Vec<usize>) -> Result<()> {
    let bytes = std::fs::read(path)?;
    if bytes.is_empty() || bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Format {
            path: path.display().to_string(),
            msg: format!(
                "file size {} is not a positive multiple of the {RECORD_BYTES}-byte record",
                bytes.len()
            ),
        });
    }
    for record in bytes.chunks_exact(RECORD_BYTES) {
        labels.push(record[0] as usize);
        data.extend(record[1..].iter().map(|&b| b as f64 / 255.0));
    }
    Ok(())
}

fn assemble(data: Vec<f64>, labels: Vec<usize>, split: Split) -> Result<Dataset> {
    let n = labels.len();
    debug_assert_eq!(data.len(), n * IMAGE_BYTES);
    Dataset::new(Tensor::from_parts(vec![n, 3, 32, 32], data), labels, 10, split)
}

/// Load the standard five training batches plus the test batch from
/// `dir`, returning `(train, test)`.
pub fn load_cifar10_binary(dir: &Path) -> Result<(Dataset, Dataset)> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for name in TRAIN_FILES {
        load_records(&dir.join(name), &mut data, &mut labels)?;
    }
    let train = assemble(data, labels, Split::Train)?;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    load_records(&dir.join(TEST_FILE), &mut data, &mut labels)?;
    let test = assemble(data, labels, Split::Test)?;
    Ok((train, test))
}
