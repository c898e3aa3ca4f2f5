//! Per-operation gradient checks against central differences. Each entry
//! draws fresh random inputs every trial and reports the worst relative
//! error so the caller can compare against the shared tolerance.

use rand::Rng;
use sigma2r_core::{concat, Tensor, Var};

use super::{fd_check, fd_check_many, seeded_rng, uniform, uniform_away_from_zero, uniform_distinct};

/// Reduce to a scalar through index-dependent weights so gradient errors
/// cannot cancel across elements.
fn weighted_sum(v: &Var) -> Var {
    let n = v.numel();
    let w: Vec<f64> = (0..n).map(|t| 1.0 + 0.3 * (t as f64).sin()).collect();
    let wt = v.tape().constant(Tensor::new(vec![n], w).unwrap());
    v.reshape(vec![n]).unwrap().mul(&wt).unwrap().sum()
}

/// Worst relative error per operation over `trials` random draws.
pub fn op_grad_suite(trials: usize) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();

    out.push((
        "add",
        fd_check_many(
            "add",
            trials,
            |r| vec![uniform(r, vec![3, 4], -2.0, 2.0), uniform(r, vec![3, 4], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].add(&v[1]).unwrap()),
        ),
    ));
    out.push((
        "sub",
        fd_check_many(
            "sub",
            trials,
            |r| vec![uniform(r, vec![3, 4], -2.0, 2.0), uniform(r, vec![3, 4], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].sub(&v[1]).unwrap()),
        ),
    ));
    out.push((
        "mul",
        fd_check_many(
            "mul",
            trials,
            |r| vec![uniform(r, vec![3, 4], -2.0, 2.0), uniform(r, vec![3, 4], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].mul(&v[1]).unwrap()),
        ),
    ));
    out.push((
        "div",
        fd_check_many(
            "div",
            trials,
            |r| {
                vec![
                    uniform(r, vec![3, 4], -2.0, 2.0),
                    uniform_away_from_zero(r, vec![3, 4], 0.5, 2.0),
                ]
            },
            &|_, v| weighted_sum(&v[0].div(&v[1]).unwrap()),
        ),
    ));

    let mut worst = 0.0f64;
    let mut rng = seeded_rng("add_scalar");
    for _ in 0..trials {
        let c = rng.random_range(-2.0..2.0);
        let x = uniform(&mut rng, vec![3, 4], -2.0, 2.0);
        worst = worst.max(fd_check(&[x], &|_, v| weighted_sum(&v[0].add_scalar(c))).max_rel_err);
    }
    out.push(("add_scalar", worst));

    let mut worst = 0.0f64;
    let mut rng = seeded_rng("mul_scalar");
    for _ in 0..trials {
        let c = rng.random_range(-2.0..2.0);
        let x = uniform(&mut rng, vec![3, 4], -2.0, 2.0);
        worst = worst.max(fd_check(&[x], &|_, v| weighted_sum(&v[0].mul_scalar(c))).max_rel_err);
    }
    out.push(("mul_scalar", worst));

    out.push((
        "matmul",
        fd_check_many(
            "matmul",
            trials,
            |r| vec![uniform(r, vec![3, 4], -1.5, 1.5), uniform(r, vec![4, 2], -1.5, 1.5)],
            &|_, v| weighted_sum(&v[0].matmul(&v[1]).unwrap()),
        ),
    ));

    out.push((
        "exp",
        fd_check_many(
            "exp",
            trials,
            |r| vec![uniform(r, vec![3, 4], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].exp()),
        ),
    ));
    out.push((
        "log",
        fd_check_many(
            "log",
            trials,
            |r| vec![uniform(r, vec![3, 4], 0.5, 3.0)],
            &|_, v| weighted_sum(&v[0].log()),
        ),
    ));
    out.push((
        "sqrt",
        fd_check_many(
            "sqrt",
            trials,
            |r| vec![uniform(r, vec![3, 4], 0.5, 3.0)],
            &|_, v| weighted_sum(&v[0].sqrt()),
        ),
    ));

    let mut worst = 0.0f64;
    let mut rng = seeded_rng("powf");
    for trial in 0..trials {
        let p = [2.0, 2.7, -1.3, 0.5][trial % 4];
        let x = uniform(&mut rng, vec![3, 4], 0.5, 2.0);
        worst = worst.max(fd_check(&[x], &|_, v| weighted_sum(&v[0].powf(p))).max_rel_err);
    }
    out.push(("powf", worst));

    out.push((
        "logistic",
        fd_check_many(
            "logistic",
            trials,
            |r| vec![uniform(r, vec![3, 4], -4.0, 4.0)],
            &|_, v| weighted_sum(&v[0].logistic()),
        ),
    ));

    out.push((
        "sum",
        fd_check_many(
            "sum",
            trials,
            |r| vec![uniform(r, vec![3, 4], -2.0, 2.0)],
            &|_, v| v[0].sum().mul_scalar(1.3),
        ),
    ));
    out.push((
        "mean",
        fd_check_many(
            "mean",
            trials,
            |r| vec![uniform(r, vec![3, 4], -2.0, 2.0)],
            &|_, v| v[0].mean().unwrap().mul_scalar(1.3),
        ),
    ));
    out.push((
        "max",
        fd_check_many(
            "max",
            trials,
            |r| vec![uniform_distinct(r, vec![3, 4], -1.0, 1.0, 1e-3)],
            &|_, v| v[0].max().unwrap().mul_scalar(1.3),
        ),
    ));

    let mut worst = 0.0f64;
    let mut rng = seeded_rng("select_rows");
    for _ in 0..trials {
        let x = uniform(&mut rng, vec![5, 3], -2.0, 2.0);
        let idx: Vec<usize> = (0..7).map(|_| rng.random_range(0..5)).collect();
        worst = worst.max(
            fd_check(&[x], &|_, v| weighted_sum(&v[0].select_rows(&idx).unwrap())).max_rel_err,
        );
    }
    out.push(("select_rows", worst));

    out.push((
        "pairwise_sq_dist",
        fd_check_many(
            "pairwise_sq_dist",
            trials,
            |r| vec![uniform(r, vec![4, 3], -2.0, 2.0), uniform(r, vec![5, 3], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].pairwise_sq_dist(&v[1]).unwrap()),
        ),
    ));
    out.push((
        "pairwise_sq_dist_self",
        fd_check_many(
            "pairwise_sq_dist_self",
            trials,
            |r| vec![uniform(r, vec![4, 3], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].pairwise_sq_dist(&v[0]).unwrap()),
        ),
    ));

    out.push((
        "broadcast_to",
        fd_check_many(
            "broadcast_to",
            trials,
            |r| vec![uniform(r, vec![1, 5], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].broadcast_to(7).unwrap()),
        ),
    ));
    out.push((
        "reshape",
        fd_check_many(
            "reshape",
            trials,
            |r| vec![uniform(r, vec![2, 6], -2.0, 2.0)],
            &|_, v| weighted_sum(&v[0].reshape(vec![3, 4]).unwrap()),
        ),
    ));
    out.push((
        "concat",
        fd_check_many(
            "concat",
            trials,
            |r| {
                vec![
                    uniform(r, vec![2, 3], -2.0, 2.0),
                    uniform(r, vec![1, 3], -2.0, 2.0),
                    uniform(r, vec![3, 3], -2.0, 2.0),
                ]
            },
            &|_, v| weighted_sum(&concat(v).unwrap()),
        ),
    ));

    out.push((
        "conv2d",
        fd_check_many(
            "conv2d",
            trials,
            |r| {
                vec![
                    uniform(r, vec![2, 2, 4, 4], -1.0, 1.0),
                    uniform(r, vec![3, 2, 3, 3], -1.0, 1.0),
                    uniform(r, vec![3], -0.5, 0.5),
                ]
            },
            &|_, v| weighted_sum(&v[0].conv2d(&v[1], &v[2], 1).unwrap()),
        ),
    ));
    out.push((
        "conv2d_unpadded",
        fd_check_many(
            "conv2d_unpadded",
            trials,
            |r| {
                vec![
                    uniform(r, vec![1, 2, 4, 4], -1.0, 1.0),
                    uniform(r, vec![2, 2, 2, 2], -1.0, 1.0),
                    uniform(r, vec![2], -0.5, 0.5),
                ]
            },
            &|_, v| weighted_sum(&v[0].conv2d(&v[1], &v[2], 0).unwrap()),
        ),
    ));

    out.push((
        "maxpool2x2",
        fd_check_many(
            "maxpool2x2",
            trials,
            |r| vec![uniform_distinct(r, vec![2, 1, 4, 4], -1.0, 1.0, 1e-3)],
            &|_, v| weighted_sum(&v[0].maxpool2x2().unwrap()),
        ),
    ));

    out.push((
        "prelu",
        fd_check_many(
            "prelu",
            trials,
            |r| {
                vec![
                    uniform_away_from_zero(r, vec![3, 4], 0.1, 2.0),
                    uniform(r, vec![1], -0.5, 1.5),
                ]
            },
            &|_, v| weighted_sum(&v[0].prelu(&v[1]).unwrap()),
        ),
    ));

    let mut worst = 0.0f64;
    let mut rng = seeded_rng("softmax_xent");
    for _ in 0..trials {
        let z = uniform(&mut rng, vec![4, 5], -3.0, 3.0);
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
        worst = worst.max(
            fd_check(&[z], &|_, v| v[0].softmax_xent(&labels).unwrap().mul_scalar(1.3))
                .max_rel_err,
        );
    }
    out.push(("softmax_xent", worst));

    out
}

/// A deeper composite graph covering op interactions and fan-out.
pub fn composite_chain_worst(trials: usize) -> f64 {
    fd_check_many(
        "composite",
        trials,
        |r| {
            vec![
                uniform(r, vec![4, 3], -1.0, 1.0),
                uniform(r, vec![3, 5], -1.0, 1.0),
                uniform(r, vec![1, 5], -0.5, 0.5),
            ]
        },
        &|_, v| {
            let h = v[0].matmul(&v[1]).unwrap();
            let h = h.add(&v[2].broadcast_to(4).unwrap()).unwrap().logistic();
            let d = h.pairwise_sq_dist(&h).unwrap();
            let spread = d.mean().unwrap();
            let pull = h.powf(2.0).sum().mul_scalar(0.05);
            spread.add(&pull).unwrap().exp()
        },
    )
}
