//! The Fuzzy-RGB toy dataset: uniformly colored 32x32 images where the
//! class channel is bright and the other two carry low noise.

use rand::Rng;

use crate::data::{Dataset, Split};
use crate::error::Result;
use crate::rng::{stream, Domain};
use crate::tensor::Tensor;

pub const FUZZY_CLASSES: usize = 3;
pub const FUZZY_SIZE: usize = 32;

/// Generate `per_class` images for each of the three classes (red,
/// green, blue). The class channel is a single value drawn from
/// `[0.2, 1.0]`, the remaining channels from `[0.0, 0.2]`, and every
/// pixel of a channel shares that value.
pub fn generate_fuzzy_rgb(per_class: usize, seed: u64) -> Result<Dataset> {
    let mut rng = stream(seed, Domain::DataGen);
    let n = FUZZY_CLASSES * per_class;
    let plane = FUZZY_SIZE * FUZZY_SIZE;
    let mut data = Vec::with_capacity(n * FUZZY_CLASSES * plane);
    let mut labels = Vec::with_capacity(n);
    for class in 0..FUZZY_CLASSES {
        for _ in 0..per_class {
            for channel in 0..FUZZY_CLASSES {
                let value = if channel == class {
                    rng.random_range(0.2..=1.0)
                } else {
                    rng.random_range(0.0..=0.2)
                };
                data.extend(std::iter::repeat_n(value, plane));
            }
            labels.push(class);
        }
    }
    Dataset::new(
        Tensor::from_parts(vec![n, FUZZY_CLASSES, FUZZY_SIZE, FUZZY_SIZE], data),
        labels,
        FUZZY_CLASSES,
        Split::Train,
    )
}
