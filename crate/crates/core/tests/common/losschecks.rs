//! Finite-difference sweeps over each loss, shared between the gradient
//! suite and the release checklist. Neighbor selection is frozen for the
//! variance-weighted loss so the checked function is smooth.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sigma2r_core::losses::{
    center_loss, cross_entropy, plan_neighbors, sigma2r_loss_with_plan, snn_loss, LossBinding,
};
use sigma2r_core::Var;

use super::{fd_check, seeded_rng, uniform};

pub struct SuiteOutcome {
    pub name: &'static str,
    pub worst_rel_err: f64,
    pub checks: usize,
}

pub fn round_robin_labels(m: usize, classes: usize) -> Vec<usize> {
    (0..m).map(|i| i % classes).collect()
}

pub fn random_geometry(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let classes = rng.random_range(2..=4);
    let m = rng.random_range(2 * classes..=16);
    let d = rng.random_range(1..=5);
    (m, d, classes)
}

pub fn binding_from(vars: &[Var], n: usize) -> LossBinding {
    LossBinding {
        centers: vars[1].clone(),
        growth_weights: vars[2].clone(),
        z: 40.0,
        epsilon: 1e-6,
        n,
        lambda: 0.01,
        temperature: 1.0,
    }
}

pub fn cross_entropy_sweep(trials: usize) -> SuiteOutcome {
    let mut rng = seeded_rng("loss-grad-xent");
    let mut out = SuiteOutcome { name: "cross_entropy", worst_rel_err: 0.0, checks: 0 };
    for _ in 0..trials {
        let (m, _, classes) = random_geometry(&mut rng);
        let logits = uniform(&mut rng, vec![m, classes], -3.0, 3.0);
        let labels = round_robin_labels(m, classes);
        let r = fd_check(&[logits], &|_, v| cross_entropy(&v[0], &labels).unwrap());
        out.worst_rel_err = out.worst_rel_err.max(r.max_rel_err);
        out.checks += r.checked;
    }
    out
}

pub fn center_sweep(trials: usize) -> SuiteOutcome {
    let mut rng = seeded_rng("loss-grad-center");
    let mut out = SuiteOutcome { name: "center", worst_rel_err: 0.0, checks: 0 };
    for _ in 0..trials {
        let (m, d, classes) = random_geometry(&mut rng);
        let features = uniform(&mut rng, vec![m, d], -2.0, 2.0);
        let centers = uniform(&mut rng, vec![classes, d], -2.0, 2.0);
        let weights = uniform(&mut rng, vec![classes], -2.0, 2.0);
        let labels = round_robin_labels(m, classes);
        let r = fd_check(&[features, centers, weights], &|_, v| {
            center_loss(&v[0], &labels, &binding_from(v, 3)).unwrap()
        });
        out.worst_rel_err = out.worst_rel_err.max(r.max_rel_err);
        out.checks += r.checked;
    }
    out
}

pub fn snn_sweep(trials: usize) -> SuiteOutcome {
    let mut rng = seeded_rng("loss-grad-snn");
    let mut out = SuiteOutcome { name: "snn", worst_rel_err: 0.0, checks: 0 };
    for trial in 0..trials {
        let (m, d, classes) = random_geometry(&mut rng);
        let t = [0.5, 1.0, 4.0][trial % 3];
        let features = uniform(&mut rng, vec![m, d], -2.0, 2.0);
        let labels = round_robin_labels(m, classes);
        let r = fd_check(&[features], &|_, v| snn_loss(&v[0], &labels, t).unwrap());
        out.worst_rel_err = out.worst_rel_err.max(r.max_rel_err);
        out.checks += r.checked;
    }
    out
}

pub fn sigma2r_sweep(trials: usize) -> SuiteOutcome {
    let mut rng = seeded_rng("loss-grad-sigma2r");
    let mut out = SuiteOutcome { name: "sigma2r", worst_rel_err: 0.0, checks: 0 };
    for trial in 0..trials {
        let (m, d, classes) = random_geometry(&mut rng);
        let n = [2, 3, 7][trial % 3];
        let features = uniform(&mut rng, vec![m, d], -2.0, 2.0);
        let centers = uniform(&mut rng, vec![classes, d], -2.0, 2.0);
        let weights = uniform(&mut rng, vec![classes], -2.0, 2.0);
        let labels = round_robin_labels(m, classes);
        let plan = plan_neighbors(&features, &labels, &centers, n);
        let r = fd_check(&[features, centers, weights], &|_, v| {
            sigma2r_loss_with_plan(&v[0], &labels, &binding_from(v, n), &plan)
                .unwrap()
                .loss
        });
        out.worst_rel_err = out.worst_rel_err.max(r.max_rel_err);
        out.checks += r.checked;
    }
    out
}

pub fn full_suite(trials: usize) -> Vec<SuiteOutcome> {
    vec![
        cross_entropy_sweep(trials),
        center_sweep(trials),
        snn_sweep(trials),
        sigma2r_sweep(trials),
    ]
}
