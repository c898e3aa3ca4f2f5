//! Invariant checks shared between the property suite and the release
//! checklist. Each check panics with a diagnostic on the first violation
//! and returns a one-line summary of what it covered.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sigma2r_core::data::cifar::load_cifar10_binary;
use sigma2r_core::data::fuzzy::{generate_fuzzy_rgb, FUZZY_CLASSES};
use sigma2r_core::data::idx::{load_idx, save_idx};
use sigma2r_core::data::sampler::class_quotas;
use sigma2r_core::data::{Dataset, Split};
use sigma2r_core::losses::{beta_value, growth_rate_value, sigma2r_loss, LossState};
use sigma2r_core::{Tape, Tensor};

use super::{naive_sigma2r, seeded_rng};

const TRIPLES: usize = 10_000;

pub fn beta_monotone_bounded() -> String {
    let mut rng = seeded_rng("prop-beta");
    for _ in 0..TRIPLES {
        let sigma_c = rng.random_range(0.0..4.0);
        let k = rng.random_range(0.01..5.0);
        let z = if rng.random_bool(0.5) { 40.0 } else { 7.5 };
        let lo = rng.random_range(-3.0..2.9);
        let hi = lo + rng.random_range(0.001..3.0);

        let b_lo = beta_value(sigma_c + lo, sigma_c, k, z);
        let b_hi = beta_value(sigma_c + hi, sigma_c, k, z);
        assert!(
            b_lo < b_hi,
            "not monotone: beta({lo:.4}) = {b_lo} >= beta({hi:.4}) = {b_hi} at k={k:.4}"
        );
        for b in [b_lo, b_hi] {
            assert!(b > 0.0 && b < z, "beta {b} escaped (0, {z})");
        }
    }
    let z = 40.0;
    assert_eq!(beta_value(1.5, 1.5, 3.0, z), z / 2.0);
    format!("beta monotone and inside (0, Z) on {TRIPLES} triples")
}

pub fn growth_rate_range() -> String {
    let mut rng = seeded_rng("prop-growth-rate");
    let (z, epsilon) = (40.0, 1e-6);
    for _ in 0..TRIPLES {
        let lo = rng.random_range(-30.0..29.0);
        let hi = lo + rng.random_range(0.001..1.0);
        let k_lo = growth_rate_value(lo, epsilon, z);
        let k_hi = growth_rate_value(hi, epsilon, z);
        assert!(k_lo < k_hi, "K({lo}) = {k_lo} >= K({hi}) = {k_hi}");
        for k in [k_lo, k_hi] {
            assert!(k > epsilon && k < epsilon + z, "K {k} escaped ({epsilon}, {})", epsilon + z);
        }
    }
    assert_eq!(growth_rate_value(-800.0, epsilon, z), epsilon);
    assert_eq!(growth_rate_value(800.0, epsilon, z), epsilon + z);
    assert_eq!(growth_rate_value(0.0, epsilon, z), epsilon + z / 2.0);
    format!("K inside (eps, eps + Z) on {TRIPLES} draws, exact at saturation")
}

pub fn quota_examples() -> String {
    let q = class_quotas(256, 10);
    assert_eq!(q.iter().sum::<usize>(), 256);
    assert!(q.iter().all(|&c| c == 25 || c == 26), "quotas {q:?}");

    let q = class_quotas(1000, 100);
    assert_eq!(q, vec![10; 100]);
    "quotas 256/10 -> {25, 26} and 1000/100 -> 10 exact".to_string()
}

pub fn fuzzy_bounds() -> String {
    let per_class = 3_334;
    let ds = generate_fuzzy_rgb(per_class, 11).unwrap();
    assert!(ds.len() >= 10_000);
    assert_eq!(ds.class_count, FUZZY_CLASSES);

    let plane = 32 * 32;
    for i in 0..ds.len() {
        let image = ds.image(i);
        let label = ds.labels[i];
        for c in 0..3 {
            let v = image[c * plane];
            assert!(
                image[c * plane..(c + 1) * plane].iter().all(|&p| p == v),
                "sample {i} channel {c} is not uniform"
            );
            if c == label {
                assert!((0.2..=1.0).contains(&v), "sample {i} main channel {v}");
            } else {
                assert!((0.0..=0.2).contains(&v), "sample {i} off channel {v}");
            }
        }
    }
    format!("channel bounds hold on {} generated samples", ds.len())
}

pub fn idx_round_trip() -> String {
    let dir = tempfile::tempdir().unwrap();
    let images_path = dir.path().join("images.idx");
    let labels_path = dir.path().join("labels.idx");

    // Pixel values on the u8 grid so quantization is the identity.
    let data: Vec<f64> = (0..2 * 3 * 2 * 2).map(|i| (i * 7 % 256) as f64 / 255.0).collect();
    let images = Tensor::new(vec![2, 3, 2, 2], data).unwrap();
    let ds = Dataset::new(images, vec![2, 0], 3, Split::Train).unwrap();

    save_idx(&ds, &images_path, &labels_path).unwrap();
    let back = load_idx(&images_path, &labels_path, Split::Train).unwrap();

    assert_eq!(back.images.shape(), ds.images.shape());
    assert_eq!(back.images.data(), ds.images.data());
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.class_count, 3);
    "IDX fixture round-trips bit-exactly".to_string()
}

pub fn cifar_round_trip() -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut expected_labels = Vec::new();
    let names = [
        "data_batch_1.bin",
        "data_batch_2.bin",
        "data_batch_3.bin",
        "data_batch_4.bin",
        "data_batch_5.bin",
        "test_batch.bin",
    ];
    for (f, name) in names.iter().enumerate() {
        let mut bytes = Vec::new();
        for r in 0..2u8 {
            let label = (f as u8 * 2 + r) % 10;
            bytes.push(label);
            bytes.extend((0..3072).map(|p| (p % 251) as u8));
            if *name != "test_batch.bin" {
                expected_labels.push(label as usize);
            }
        }
        std::fs::write(dir.path().join(name), bytes).unwrap();
    }

    let (train, test) = load_cifar10_binary(dir.path()).unwrap();
    assert_eq!(train.len(), 10);
    assert_eq!(test.len(), 2);
    assert_eq!(train.labels, expected_labels);
    assert_eq!(train.images.shape(), [10, 3, 32, 32]);
    let first = train.image(0);
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 1.0 / 255.0);
    assert_eq!(first[250], 250.0 / 255.0);
    assert_eq!(first[251], 0.0);
    "CIFAR archive round-trips through the loader".to_string()
}

pub fn random_batch(
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<f64>>, Vec<f64>) {
    let classes = rng.random_range(2..=4);
    let m = rng.random_range(classes * 2..=20);
    let d = rng.random_range(1..=6);
    let features: Vec<Vec<f64>> =
        (0..m).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels: Vec<usize> = (0..m).map(|i| i % classes).collect();
    let centers: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let weights: Vec<f64> = (0..classes).map(|_| rng.random_range(-2.0..2.0)).collect();
    (features, labels, centers, weights)
}

pub fn loss_of(
    features: &[Vec<f64>],
    labels: &[usize],
    centers: &[Vec<f64>],
    weights: &[f64],
    n: usize,
) -> f64 {
    let state = LossState {
        centers: Tensor::from_rows(centers).unwrap(),
        growth_weights: Tensor::new(vec![weights.len()], weights.to_vec()).unwrap(),
        z: 40.0,
        epsilon: 1e-6,
        n,
        lambda: 0.01,
        temperature: 1.0,
    };
    let tape = Tape::new();
    let binding = state.bind(&tape);
    let flat: Vec<f64> = features.iter().flatten().copied().collect();
    let var = tape.variable(Tensor::new(vec![features.len(), features[0].len()], flat).unwrap());
    sigma2r_loss(&var, labels, &binding).unwrap().loss.item()
}

/// The implementation walks class partitions; the reference sums over
/// instances in batch order. Equal results on random batches show the two
/// decompositions are the same sum.
pub fn partition_identity() -> String {
    let mut rng = seeded_rng("prop-partition");
    for trial in 0..100 {
        let (features, labels, centers, weights) = random_batch(&mut rng);
        let n = [2, 3, 7][trial % 3];
        let flat = naive_sigma2r(&features, &labels, &centers, &weights, 40.0, 1e-6, n);
        let partitioned = loss_of(&features, &labels, &centers, &weights, n);
        assert!(
            (flat - partitioned).abs() <= 1e-10,
            "trial {trial}: flat {flat} vs partitioned {partitioned}"
        );
    }
    "class partition equals flat instance sum on 100 batches".to_string()
}

pub fn translation_invariance() -> String {
    let mut rng = seeded_rng("prop-translation");
    for trial in 0..50 {
        let (features, labels, centers, weights) = random_batch(&mut rng);
        let d = features[0].len();
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();

        let moved_f: Vec<Vec<f64>> = features
            .iter()
            .map(|row| row.iter().zip(&shift).map(|(a, s)| a + s).collect())
            .collect();
        let moved_c: Vec<Vec<f64>> = centers
            .iter()
            .map(|row| row.iter().zip(&shift).map(|(a, s)| a + s).collect())
            .collect();

        let before = loss_of(&features, &labels, &centers, &weights, 3);
        let after = loss_of(&moved_f, &labels, &moved_c, &weights, 3);
        assert!(
            (before - after).abs() <= 1e-9 * before.abs().max(1.0),
            "trial {trial}: {before} vs {after}"
        );
    }
    "loss invariant under joint translation on 50 batches".to_string()
}

pub fn permutation_invariance() -> String {
    let mut rng = seeded_rng("prop-permutation");
    for trial in 0..50 {
        let (features, labels, centers, weights) = random_batch(&mut rng);
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.shuffle(&mut rng);
        let perm_f: Vec<Vec<f64>> = order.iter().map(|&i| features[i].clone()).collect();
        let perm_l: Vec<usize> = order.iter().map(|&i| labels[i]).collect();

        let before = loss_of(&features, &labels, &centers, &weights, 3);
        let after = loss_of(&perm_f, &perm_l, &centers, &weights, 3);
        assert!(
            (before - after).abs() <= 1e-10 * before.abs().max(1.0),
            "trial {trial}: {before} vs {after}"
        );
    }
    "loss invariant under batch permutation on 50 batches".to_string()
}

/// Every check in the order the release checklist reports them.
pub fn all() -> Vec<String> {
    vec![
        quota_examples(),
        fuzzy_bounds(),
        idx_round_trip(),
        cifar_round_trip(),
        beta_monotone_bounded(),
        growth_rate_range(),
        partition_identity(),
        translation_invariance(),
        permutation_invariance(),
    ]
}
