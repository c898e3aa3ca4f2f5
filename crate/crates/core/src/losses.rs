//! The loss family under study and the learnable state it shares.
//!
//! Four losses are provided: plain cross-entropy, the classic center
//! loss, the soft nearest neighbor loss, and a variance-weighted center
//! loss ([`sigma2r_loss`]) that scales each instance's pull toward its
//! class center by how much sparser the instance's neighborhood is than
//! the center's. The weight is a per-class sigmoid with a learnable slope,
//! so both the centers and the slopes train alongside the network.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{concat, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_Z: f64 = 40.0;
pub const DEFAULT_NEIGHBORS: usize = 7;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

/// Which auxiliary loss accompanies cross-entropy in [`joint_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    None,
    Center,
    Snn,
    Sigma2r,
}

impl AuxKind {
    pub const ALL: [AuxKind; 4] = [AuxKind::None, AuxKind::Center, AuxKind::Snn, AuxKind::Sigma2r];

    pub fn name(self) -> &'static str {
        match self {
            AuxKind::None => "none",
            AuxKind::Center => "center",
            AuxKind::Snn => "snn",
            AuxKind::Sigma2r => "sigma2r",
        }
    }
}

impl fmt::Display for AuxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AuxKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AuxKind::None),
            "center" => Ok(AuxKind::Center),
            "snn" => Ok(AuxKind::Snn),
            "sigma2r" => Ok(AuxKind::Sigma2r),
            other => Err(Error::Config(format!(
                "unknown aux_kind '{other}', expected one of {{none, center, snn, sigma2r}}"
            ))),
        }
    }
}

/// Learnable loss parameters plus the fixed hyperparameters around them.
/// The centers and growth weights are updated only by the loss-parameter
/// optimizer; the constants are set once per run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossState {
    /// Class centers, one d-dimensional row per class.
    pub centers: Tensor,
    /// Unconstrained per-class weights behind the growth rate K.
    pub growth_weights: Tensor,
    /// Output-range cap of the instance weight.
    pub z: f64,
    /// Lower offset of the growth rate.
    pub epsilon: f64,
    /// Neighborhood size for the spread statistics.
    pub n: usize,
    /// Weight of the auxiliary loss inside the joint loss.
    pub lambda: f64,
    /// Temperature of the soft nearest neighbor loss.
    pub temperature: f64,
}

impl LossState {
    /// State with the documented defaults, centers and growth weights
    /// drawn from a standard normal.
    pub fn new(num_classes: usize, feature_dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::with_params(
            num_classes,
            feature_dim,
            DEFAULT_Z,
            DEFAULT_EPSILON,
            DEFAULT_NEIGHBORS,
            DEFAULT_LAMBDA,
            DEFAULT_TEMPERATURE,
            rng,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_params(
        num_classes: usize,
        feature_dim: usize,
        z: f64,
        epsilon: f64,
        n: usize,
        lambda: f64,
        temperature: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_classes == 0 || feature_dim == 0 {
            return Err(Error::Config(format!(
                "loss state needs at least one class and one feature dimension, got {num_classes} x {feature_dim}"
            )));
        }
        let normal = StandardNormal;
        let centers = Tensor::from_parts(
            vec![num_classes, feature_dim],
            (0..num_classes * feature_dim).map(|_| normal.sample(rng)).collect(),
        );
        let growth_weights = Tensor::from_parts(
            vec![num_classes],
            (0..num_classes).map(|_| normal.sample(rng)).collect(),
        );
        let state = LossState { centers, growth_weights, z, epsilon, n, lambda, temperature };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z > 0.0) {
            return Err(Error::Config(format!("Z must be positive, got {}", self.z)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("neighborhood size n must be >= 2, got {}", self.n)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.centers.shape().len() != 2
            || self.growth_weights.shape() != [self.centers.shape()[0]]
        {
            return Err(Error::Config(format!(
                "centers {:?} and growth weights {:?} are inconsistent",
                self.centers.shape(),
                self.growth_weights.shape()
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.centers.shape()[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.centers.shape()[1]
    }

    /// Register the learnable tensors on a tape for one forward/backward
    /// pass. The trainer reads their gradients back after `backward`.
    pub fn bind(&self, tape: &Tape) -> LossBinding {
        LossBinding {
            centers: tape.variable(self.centers.clone()),
            growth_weights: tape.variable(self.growth_weights.clone()),
            z: self.z,
            epsilon: self.epsilon,
            n: self.n,
            lambda: self.lambda,
            temperature: self.temperature,
        }
    }
}

/// Tape-bound view of a [`LossState`] for one step.
pub struct LossBinding {
    pub centers: Var,
    pub growth_weights: Var,
    pub z: f64,
    pub epsilon: f64,
    pub n: usize,
    pub lambda: f64,
    pub temperature: f64,
}

impl LossBinding {
    pub fn num_classes(&self) -> usize {
        self.centers.shape()[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.centers.shape()[1]
    }
}

/// Joint loss value with its pieces and, for the variance-weighted loss,
/// the per-instance diagnostics.
pub struct LossOutput {
    /// `xent + lambda * aux`, still attached to the tape.
    pub total: Var,
    pub xent: f64,
    pub aux: f64,
    pub diagnostics: Option<Sigma2rDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct Sigma2rDiagnostics {
    /// Instance weights in batch order.
    pub betas: Vec<f64>,
    /// Neighborhood spread of each class center; `None` for classes
    /// absent from the batch.
    pub center_sigmas: Vec<Option<f64>>,
}

/// Everything [`sigma2r_loss`] returns: the unweighted loss term plus the
/// diagnostics the metrics log wants.
pub struct Sigma2rOutput {
    pub loss: Var,
    pub diagnostics: Sigma2rDiagnostics,
}

/// Mean negative log softmax probability of the correct class.
pub fn cross_entropy(logits: &Var, labels: &[usize]) -> Result<Var> {
    logits.softmax_xent(labels)
}

fn check_features(op: &'static str, features: &Var, labels: &[usize], binding: &LossBinding) -> Result<(usize, usize)> {
    let shape = features.shape();
    if shape.len() != 2 {
        return Err(Error::Domain {
            op,
            msg: format!("features must be [m, d], got {shape:?}"),
        });
    }
    let (m, d) = (shape[0], shape[1]);
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != m {
        return Err(Error::ShapeMismatch { op, lhs: shape, rhs: vec![labels.len()] });
    }
    if d != binding.feature_dim() {
        return Err(Error::ShapeMismatch { op, lhs: shape, rhs: binding.centers.shape() });
    }
    for &y in labels {
        if y >= binding.num_classes() {
            return Err(Error::LabelOutOfRange { label: y, classes: binding.num_classes() });
        }
    }
    Ok((m, d))
}

/// Half the summed squared distance of each feature to its class center,
/// before any lambda weighting. This is the auxiliary value used inside
/// [`joint_loss`].
fn half_center_sum(features: &Var, labels: &[usize], binding: &LossBinding) -> Result<Var> {
    let selected = binding.centers.select_rows(labels)?;
    Ok(features.sub(&selected)?.powf(2.0).sum().mul_scalar(0.5))
}

/// Classic center loss: `(lambda / 2) * sum_i ||x_i - C_{y_i}||^2`.
pub fn center_loss(features: &Var, labels: &[usize], binding: &LossBinding) -> Result<Var> {
    check_features("center_loss", features, labels, binding)?;
    Ok(half_center_sum(features, labels, binding)?.mul_scalar(binding.lambda))
}

fn logistic64(x: f64) -> f64 {
    0.5 * (1.0 + (0.5 * x).tanh())
}

/// Growth rate `K = epsilon + Z * logistic(w)`, differentiable in `w`.
/// `w` is a `[1]` tensor (one class's weight).
pub fn growth_rate(w: &Var, epsilon: f64, z: f64) -> Var {
    w.logistic().mul_scalar(z).add_scalar(epsilon)
}

/// Plain-number version of [`growth_rate`] for reporting.
pub fn growth_rate_value(w: f64, epsilon: f64, z: f64) -> f64 {
    epsilon + z * logistic64(w)
}

/// Instance weight `beta = Z * logistic(K * (sigma_x - sigma_c))`:
/// strictly increasing in `sigma_x`, capped to `(0, Z)`.
pub fn beta(sigma_x: &Var, sigma_c: &Var, k: &Var, z: f64) -> Result<Var> {
    Ok(sigma_x.sub(sigma_c)?.mul(k)?.logistic().mul_scalar(z))
}

/// Plain-number version of [`beta`] for reporting.
pub fn beta_value(sigma_x: f64, sigma_c: f64, k: f64, z: f64) -> f64 {
    z * logistic64(k * (sigma_x - sigma_c))
}

/// Population standard deviation of the Euclidean distances from `p` to
/// its `n` nearest points in `same_class_points` (ties broken by lowest
/// index). Fewer than `n` points: all are used. Fewer than two points:
/// the spread is defined as zero.
pub fn neighborhood_std(p: &[f64], same_class_points: &[&[f64]], n: usize) -> f64 {
    if same_class_points.len() < 2 {
        return 0.0;
    }
    let mut dists: Vec<(f64, usize)> = same_class_points
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let d2: f64 = p.iter().zip(*q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.truncate(n);
    population_std_scalar(dists.iter().map(|(d, _)| *d))
}

fn population_std_scalar(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let count = values.clone().count();
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    var.sqrt()
}

/// Frozen neighbor choices for one batch. The selection is the only
/// non-differentiable part of the variance-weighted loss, so pinning it
/// makes the rest of the computation a smooth function of its inputs
/// (which finite-difference checks rely on).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborPlan {
    /// Per batch instance: indices of its selected same-class neighbors.
    pub instance: Vec<Vec<usize>>,
    /// Per class: indices of the instances selected as the center's
    /// neighbors. Empty for classes absent from the batch.
    pub center: Vec<Vec<usize>>,
}

fn nearest_indices(p: &[f64], candidates: &[(usize, &[f64])], n: usize) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = candidates
        .iter()
        .map(|(idx, q)| {
            let d2: f64 = p.iter().zip(*q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, *idx)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.truncate(n);
    dists.into_iter().map(|(_, idx)| idx).collect()
}

/// Choose each instance's and each center's nearest same-class batch
/// mates from the current values.
pub fn plan_neighbors(
    features: &Tensor,
    labels: &[usize],
    centers: &Tensor,
    n: usize,
) -> NeighborPlan {
    let m = labels.len();
    let num_classes = centers.shape()[0];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }

    let mut instance = vec![Vec::new(); m];
    let mut center = vec![Vec::new(); num_classes];
    for (j, mem) in members.iter().enumerate() {
        if mem.is_empty() {
            continue;
        }
        let rows: Vec<(usize, &[f64])> = mem.iter().map(|&i| (i, features.row(i))).collect();
        center[j] = nearest_indices(centers.row(j), &rows, n);
        for &i in mem {
            let others: Vec<(usize, &[f64])> =
                rows.iter().filter(|(idx, _)| *idx != i).cloned().collect();
            instance[i] = nearest_indices(features.row(i), &others, n);
        }
    }
    NeighborPlan { instance, center }
}

/// Square root that keeps exact zeros at zero and excludes them from the
/// gradient, since the root is not differentiable there.
fn sqrt_detach_zeros(sq: &Var) -> Result<Var> {
    let v = sq.value();
    if v.data().iter().all(|&x| x != 0.0) {
        return Ok(sq.sqrt());
    }
    let mask: Vec<f64> = v.data().iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect();
    let keep: Vec<f64> = mask.iter().map(|m| 1.0 - m).collect();
    let tape = sq.tape();
    let mask_t = tape.constant(Tensor::from_parts(v.shape().to_vec(), mask));
    let keep_t = tape.constant(Tensor::from_parts(v.shape().to_vec(), keep));
    sq.add(&mask_t)?.sqrt().mul(&keep_t)
}

/// Differentiable population standard deviation of a rank-1 vector of
/// at least two distances.
fn population_std(dists: &Var) -> Result<Var> {
    let k = dists.numel();
    let mean = dists.mean()?;
    let centered = dists.sub(&mean.broadcast_to(k)?)?;
    let var = centered.powf(2.0).mean()?;
    sqrt_detach_zeros(&var)
}

/// Spread of `point` (a `[1, d]` row) over the selected batch instances,
/// or a constant zero when fewer than two are available.
fn sigma_over(
    features: &Var,
    point: &Var,
    chosen: &[usize],
) -> Result<Var> {
    if chosen.len() < 2 {
        return Ok(features.tape().constant(Tensor::scalar(0.0)));
    }
    let pts = features.select_rows(chosen)?;
    let sq = pts.pairwise_sq_dist(point)?.reshape(vec![chosen.len()])?;
    population_std(&sqrt_detach_zeros(&sq)?)
}

struct Sigma2rTerms {
    terms: Vec<Option<Var>>,
    betas: Vec<f64>,
    center_sigmas: Vec<Option<f64>>,
}

fn sigma2r_terms(
    features: &Var,
    labels: &[usize],
    binding: &LossBinding,
    plan: &NeighborPlan,
    forced_beta: Option<f64>,
) -> Result<Sigma2rTerms> {
    let (m, _) = check_features("sigma2r_loss", features, labels, binding)?;
    if plan.instance.len() != m || plan.center.len() != binding.num_classes() {
        return Err(Error::Domain {
            op: "sigma2r_loss",
            msg: format!(
                "neighbor plan covers {} instances / {} classes, batch has {} / {}",
                plan.instance.len(),
                plan.center.len(),
                m,
                binding.num_classes()
            ),
        });
    }
    let tape = features.tape();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); binding.num_classes()];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }

    let mut terms: Vec<Option<Var>> = vec![None; m];
    let mut betas = vec![0.0; m];
    let mut center_sigmas = vec![None; binding.num_classes()];

    for (j, mem) in members.iter().enumerate() {
        if mem.is_empty() {
            continue;
        }
        let c_j = binding.centers.select_rows(&[j])?;
        let sigma_c = sigma_over(features, &c_j, &plan.center[j])?;
        center_sigmas[j] = Some(sigma_c.item());
        let k_j = growth_rate(&binding.growth_weights.select_rows(&[j])?, binding.epsilon, binding.z);

        for &i in mem {
            let x_i = features.select_rows(&[i])?;
            let sq_dist = x_i.pairwise_sq_dist(&c_j)?.reshape(vec![1])?;
            let beta_i = match forced_beta {
                Some(b) => tape.constant(Tensor::scalar(b)),
                None => {
                    let sigma_x = sigma_over(features, &x_i, &plan.instance[i])?;
                    beta(&sigma_x, &sigma_c, &k_j, binding.z)?
                }
            };
            betas[i] = beta_i.item();
            terms[i] = Some(beta_i.mul(&sq_dist)?);
        }
    }
    Ok(Sigma2rTerms { terms, betas, center_sigmas })
}

fn reduce_terms(tape: &Tape, terms: Vec<Option<Var>>) -> Result<Var> {
    let m = terms.len();
    let present: Vec<Var> = terms.into_iter().flatten().collect();
    if present.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    Ok(concat(&present)?.sum().mul_scalar(1.0 / m as f64))
}

/// Variance-weighted center loss: the mean over the batch of
/// `beta_i * ||x_i - C_{y_i}||^2`, where `beta_i` compares the
/// neighborhood spread of the instance against that of its class center.
/// Neighbor selection comes from the current values and is not
/// differentiated; all other terms carry gradients to the features, the
/// centers, and the growth weights.
pub fn sigma2r_loss(features: &Var, labels: &[usize], binding: &LossBinding) -> Result<Sigma2rOutput> {
    let plan = plan_neighbors(&features.value(), labels, &binding.centers.value(), binding.n);
    sigma2r_loss_with_plan(features, labels, binding, &plan)
}

/// [`sigma2r_loss`] with the neighbor choices pinned by the caller.
pub fn sigma2r_loss_with_plan(
    features: &Var,
    labels: &[usize],
    binding: &LossBinding,
    plan: &NeighborPlan,
) -> Result<Sigma2rOutput> {
    let parts = sigma2r_terms(features, labels, binding, plan, None)?;
    let loss = reduce_terms(features.tape(), parts.terms)?;
    Ok(Sigma2rOutput {
        loss,
        diagnostics: Sigma2rDiagnostics {
            betas: parts.betas,
            center_sigmas: parts.center_sigmas,
        },
    })
}

/// Diagnostic variant with the instance weight pinned to a constant,
/// which reduces the loss to an unweighted mean squared center distance
/// scaled by that constant.
pub fn sigma2r_loss_with_constant_beta(
    features: &Var,
    labels: &[usize],
    binding: &LossBinding,
    forced_beta: f64,
) -> Result<Var> {
    let plan = plan_neighbors(&features.value(), labels, &binding.centers.value(), binding.n);
    let parts = sigma2r_terms(features, labels, binding, &plan, Some(forced_beta))?;
    reduce_terms(features.tape(), parts.terms)
}

/// Log-sum-exp of a rank-1 vector, shifted by its maximum so large
/// magnitudes cannot overflow.
fn log_sum_exp(v: &Var) -> Result<Var> {
    let mx = v.max()?;
    let shifted = v.sub(&mx.broadcast_to(v.numel())?)?;
    Ok(shifted.exp().sum().log().add(&mx)?)
}

/// Soft nearest neighbor loss at temperature `t`: the mean over instances
/// of `-log` of the same-class share of exponentiated negative squared
/// distances. Instances with no same-class partner are excluded and the
/// mean is taken over the rest.
pub fn snn_loss(features: &Var, labels: &[usize], t: f64) -> Result<Var> {
    let shape = features.shape();
    if shape.len() != 2 {
        return Err(Error::Domain {
            op: "snn_loss",
            msg: format!("features must be [m, d], got {shape:?}"),
        });
    }
    let m = shape[0];
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != m {
        return Err(Error::ShapeMismatch { op: "snn_loss", lhs: shape, rhs: vec![labels.len()] });
    }
    if !(t > 0.0) {
        return Err(Error::Domain {
            op: "snn_loss",
            msg: format!("temperature must be positive, got {t}"),
        });
    }

    let mut terms = Vec::new();
    for i in 0..m {
        let same: Vec<usize> =
            (0..m).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let x_i = features.select_rows(&[i])?;
        let logits = x_i
            .pairwise_sq_dist(features)?
            .reshape(vec![m])?
            .mul_scalar(-1.0 / t);
        let lse_all = log_sum_exp(&logits.select_rows(&others)?)?;
        let lse_same = log_sum_exp(&logits.select_rows(&same)?)?;
        terms.push(lse_all.sub(&lse_same)?);
    }
    if terms.is_empty() {
        return Err(Error::DegenerateSnnBatch);
    }
    concat(&terms)?.mean()
}

/// Cross-entropy plus `lambda` times the chosen auxiliary loss. The
/// auxiliary term enters unweighted and `lambda` is applied exactly once
/// here, so values are comparable across kinds.
pub fn joint_loss(
    logits: &Var,
    features: &Var,
    labels: &[usize],
    binding: &LossBinding,
    aux_kind: AuxKind,
) -> Result<LossOutput> {
    let xent = cross_entropy(logits, labels)?;
    let xent_value = xent.item();
    let (aux, diagnostics) = match aux_kind {
        AuxKind::None => {
            return Ok(LossOutput { total: xent, xent: xent_value, aux: 0.0, diagnostics: None })
        }
        AuxKind::Center => {
            check_features("center_loss", features, labels, binding)?;
            (half_center_sum(features, labels, binding)?, None)
        }
        AuxKind::Snn => (snn_loss(features, labels, binding.temperature)?, None),
        AuxKind::Sigma2r => {
            let out = sigma2r_loss(features, labels, binding)?;
            (out.loss, Some(out.diagnostics))
        }
    };
    let aux_value = aux.item();
    let total = xent.add(&aux.mul_scalar(binding.lambda))?;
    Ok(LossOutput { total, xent: xent_value, aux: aux_value, diagnostics })
}
