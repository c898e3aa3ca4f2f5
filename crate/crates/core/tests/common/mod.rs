//! Shared oracles for the integration suites: a central-difference
//! gradient checker and a brute-force reference for the variance-weighted
//! loss. Everything here recomputes results from first principles and
//! never calls into the code paths it is checking.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigma2r_core::{Tape, Tensor, Var};

pub const FD_H: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;

pub type BuildFn<'a> = dyn Fn(&Tape, &[Var]) -> Var + 'a;

/// Largest relative error between reverse-mode and central-difference
/// gradients over every element of every input.
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

fn eval(inputs: &[Tensor], build: &BuildFn) -> f64 {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    build(&tape, &vars).item()
}

/// Compare reverse-mode gradients against central differences for every
/// element of every input. `build` must record the same computation for
/// identical input values each time it is called.
pub fn fd_check(inputs: &[Tensor], build: &BuildFn) -> FdReport {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let root = build(&tape, &vars);
    root.backward().expect("backward failed during gradient check");
    let grads: Vec<Tensor> = vars
        .iter()
        .map(|v| v.grad().unwrap_or_else(|| Tensor::zeros(v.shape())))
        .collect();

    let mut report = FdReport { max_rel_err: 0.0, checked: 0 };
    for (i, input) in inputs.iter().enumerate() {
        for e in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += FD_H;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= FD_H;
            let fd = (eval(&plus, build) - eval(&minus, build)) / (2.0 * FD_H);
            let ad = grads[i].data()[e];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1.0);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
            }
            report.checked += 1;
        }
    }
    report
}

/// Run `fd_check` across `trials` random input draws; returns the worst
/// relative error seen so callers can assert against [`FD_TOL`].
pub fn fd_check_many(
    op: &str,
    trials: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Vec<Tensor>,
    build: &BuildFn,
) -> f64 {
    let mut rng = seeded_rng(op);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let inputs = draw(&mut rng);
        worst = worst.max(fd_check(&inputs, build).max_rel_err);
    }
    worst
}

pub mod losschecks;
pub mod opchecks;
pub mod propchecks;

/// Sweep random batches comparing the tape implementation of the
/// variance-weighted loss against [`naive_sigma2r`]. Panics with the trial
/// geometry on the first divergence beyond `tol`; returns the worst
/// absolute difference seen.
pub fn oracle_sweep(trials: usize, tol: f64) -> f64 {
    use sigma2r_core::losses::{sigma2r_loss, LossState};

    let mut rng = seeded_rng("sigma2r-oracle");
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let m = rng.random_range(2..=32);
        let d = rng.random_range(1..=8);
        let classes = rng.random_range(1..=5);
        let n = [2, 3, 7][trial % 3];
        let z = if trial % 5 == 0 { 1.0 } else { 40.0 };

        let features: Vec<Vec<f64>> =
            (0..m).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..classes)).collect();
        let centers: Vec<Vec<f64>> =
            (0..classes).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let weights: Vec<f64> = (0..classes).map(|_| rng.random_range(-2.0..2.0)).collect();

        let expected = naive_sigma2r(&features, &labels, &centers, &weights, z, 1e-6, n);

        let state = LossState {
            centers: Tensor::from_rows(&centers).unwrap(),
            growth_weights: Tensor::new(vec![classes], weights).unwrap(),
            z,
            epsilon: 1e-6,
            n,
            lambda: 0.01,
            temperature: 1.0,
        };
        let tape = Tape::new();
        let binding = state.bind(&tape);
        let feat_rows: Vec<f64> = features.iter().flatten().copied().collect();
        let features_var = tape.variable(Tensor::new(vec![m, d], feat_rows).unwrap());
        let got = sigma2r_loss(&features_var, &labels, &binding).unwrap().loss.item();

        let diff = (got - expected).abs();
        worst = worst.max(diff);
        assert!(
            diff <= tol,
            "trial {trial}: m={m} d={d} classes={classes} n={n}: |{got} - {expected}| = {diff:.3e}"
        );
    }
    worst
}

/// Brute-force reference for the variance-weighted center loss: explicit
/// O(m^2) distance tables, explicit sorts, scalar arithmetic only, written
/// directly from the definition as a flat per-instance sum.
pub fn naive_sigma2r(
    features: &[Vec<f64>],
    labels: &[usize],
    centers: &[Vec<f64>],
    growth_weights: &[f64],
    z: f64,
    epsilon: f64,
    n: usize,
) -> f64 {
    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
    fn pop_std(ds: &[f64]) -> f64 {
        if ds.len() < 2 {
            return 0.0;
        }
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        (ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / ds.len() as f64).sqrt()
    }
    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }
    fn nearest_dists(p: &[f64], pts: &[(usize, &[f64])], n: usize) -> Vec<f64> {
        let mut ds: Vec<(f64, usize)> =
            pts.iter().map(|(idx, q)| (euclid(p, q), *idx)).collect();
        ds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ds.truncate(n);
        ds.into_iter().map(|(d, _)| d).collect()
    }

    let m = features.len();
    let mut total = 0.0;
    for i in 0..m {
        let y = labels[i];

        let same_others: Vec<(usize, &[f64])> = (0..m)
            .filter(|&j| j != i && labels[j] == y)
            .map(|j| (j, features[j].as_slice()))
            .collect();
        let sigma_x = pop_std(&nearest_dists(&features[i], &same_others, n));

        let class_members: Vec<(usize, &[f64])> = (0..m)
            .filter(|&j| labels[j] == y)
            .map(|j| (j, features[j].as_slice()))
            .collect();
        let sigma_c = pop_std(&nearest_dists(&centers[y], &class_members, n));

        let k = epsilon + z * sigmoid(growth_weights[y]);
        let beta = z * sigmoid(k * (sigma_x - sigma_c));
        let sq = features[i]
            .iter()
            .zip(&centers[y])
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>();
        total += beta * sq;
    }
    total / m as f64
}

/// Deterministic generator, one stream per oracle call site.
pub fn seeded_rng(label: &str) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (i, b) in label.bytes().enumerate() {
        seed[i % 32] ^= b;
    }
    ChaCha8Rng::from_seed(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Uniform draw bounded away from zero on both sides, for denominators and
/// kinked activations.
pub fn uniform_away_from_zero(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.random_range(lo..hi)
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Uniform draw where every pair of elements differs by at least `gap`,
/// so max-style selections stay stable under the FD perturbation.
pub fn uniform_distinct(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64, gap: f64) -> Tensor {
    'outer: loop {
        let t = uniform(rng, shape.clone(), lo, hi);
        let d = t.data();
        for i in 0..d.len() {
            for j in (i + 1)..d.len() {
                if (d[i] - d[j]).abs() < gap {
                    continue 'outer;
                }
            }
        }
        return t;
    }
}
