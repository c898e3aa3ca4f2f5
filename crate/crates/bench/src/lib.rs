//! Shared fixtures for the criterion benches.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigma2r_core::data::{Dataset, Split};
use sigma2r_core::losses::LossState;
use sigma2r_core::nn::{Arch, Model};
use sigma2r_core::Tensor;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(42)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

pub struct LossFixture {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub state: LossState,
}

pub fn loss_fixture(m: usize, d: usize, classes: usize, n: usize) -> LossFixture {
    let mut rng = rng();
    LossFixture {
        features: random_tensor(&mut rng, vec![m, d], -2.0, 2.0),
        labels: (0..m).map(|i| i % classes).collect(),
        state: LossState {
            centers: random_tensor(&mut rng, vec![classes, d], -2.0, 2.0),
            growth_weights: random_tensor(&mut rng, vec![classes], -1.0, 1.0),
            z: 40.0,
            epsilon: 1e-6,
            n,
            lambda: 0.01,
            temperature: 1.0,
        },
    }
}

pub fn small_convnet(feature_dim: usize, classes: usize) -> Model {
    Arch::SmallConvnet.build(3, 32, feature_dim, classes, &mut rng()).unwrap()
}

pub fn image_batch(m: usize) -> Tensor {
    random_tensor(&mut rng(), vec![m, 3, 32, 32], 0.0, 1.0)
}

pub fn balanced_dataset(per_class: usize, classes: usize) -> Dataset {
    let labels: Vec<usize> = (0..per_class * classes).map(|i| i % classes).collect();
    let images = Tensor::zeros(vec![labels.len(), 1, 2, 2]);
    Dataset::new(images, labels, classes, Split::Train).unwrap()
}
