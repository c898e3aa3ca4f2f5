//! The dual-optimizer training loop: one Adam instance for the model
//! weights, a second for the loss parameters (centers and growth-rate
//! weights), both annealed with a half-cosine schedule.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::augment::{augment_batch, AugmentOps};
use crate::data::sampler::balanced_batches;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{joint_loss, AuxKind, LossState};
use crate::nn::{Arch, Model};
use crate::rng::{stream, Domain};
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam accumulators for one parameter group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
    pub base_lr: f64,
}

impl AdamState {
    pub fn new(shapes: &[Vec<usize>], base_lr: f64) -> AdamState {
        AdamState {
            m: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            step: 0,
            base_lr,
        }
    }

    pub fn for_params(params: &[&Tensor], base_lr: f64) -> AdamState {
        let shapes: Vec<Vec<usize>> = params.iter().map(|p| p.shape().to_vec()).collect();
        AdamState::new(&shapes, base_lr)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One optimizer step over a parameter group. `grads[i]` of `None`
/// aborts, naming `names[i]`.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [&mut Tensor],
    grads: &[Option<Tensor>],
    names: &[String],
    lr_now: f64,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, param) in params.iter_mut().enumerate() {
        let g = grads[i]
            .as_ref()
            .ok_or_else(|| Error::MissingGradient(names[i].clone()))?;
        if g.shape() != param.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: param.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = param.data_mut();
        let g = g.data();
        for j in 0..p.len() {
            m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            p[j] -= lr_now * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

/// Half-cosine decay from `base_lr` at epoch 0 to zero at `total_epochs`.
pub fn cosine_lr(base_lr: f64, epoch: usize, total_epochs: usize) -> f64 {
    if total_epochs == 0 {
        return base_lr;
    }
    base_lr * (1.0 + (std::f64::consts::PI * epoch as f64 / total_epochs as f64).cos()) / 2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub feature_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub model_lr: f64,
    pub loss_lr: f64,
    pub aux_kind: AuxKind,
    pub lambda: f64,
    pub z: f64,
    pub n: usize,
    pub epsilon: f64,
    pub temperature: f64,
    pub seed: u64,
    pub augment: bool,
}

impl TrainConfig {
    /// Conservative defaults for the synthetic dataset.
    pub fn fuzzy_default() -> TrainConfig {
        TrainConfig {
            arch: Arch::SmallConvnet,
            feature_dim: 2,
            epochs: 30,
            batch_size: 48,
            model_lr: 0.01,
            loss_lr: 0.1,
            aux_kind: AuxKind::Sigma2r,
            lambda: crate::losses::DEFAULT_LAMBDA,
            z: crate::losses::DEFAULT_Z,
            n: crate::losses::DEFAULT_NEIGHBORS,
            epsilon: crate::losses::DEFAULT_EPSILON,
            temperature: crate::losses::DEFAULT_TEMPERATURE,
            seed: 0,
            augment: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool); 8] = [
            ("feature_dim", self.feature_dim >= 2),
            ("batch_size", self.batch_size >= 2),
            ("model_lr", self.model_lr.is_finite() && self.model_lr > 0.0),
            ("loss_lr", self.loss_lr.is_finite() && self.loss_lr > 0.0),
            ("lambda", self.lambda.is_finite() && self.lambda >= 0.0),
            ("z", self.z.is_finite() && self.z > 0.0),
            ("n", self.n >= 2),
            ("epsilon", self.epsilon.is_finite() && self.epsilon > 0.0),
        ];
        for (key, ok) in checks {
            if !ok {
                return Err(Error::Config(format!("invalid value for {key}")));
            }
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config("invalid value for temperature".into()));
        }
        Ok(())
    }
}

/// One epoch of measurements. `test_*` fields are NaN / empty when the
/// run has no test split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub total_loss: f64,
    pub xent: f64,
    pub aux: f64,
    pub train_icj: Vec<f64>,
    pub test_icj: Vec<f64>,
    pub wk: Vec<f64>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: Model,
    pub loss_state: LossState,
    pub records: Vec<MetricsRecord>,
}

pub fn train(cfg: &TrainConfig, train_ds: &Dataset, test_ds: Option<&Dataset>) -> Result<TrainOutput> {
    train_with_observer(cfg, train_ds, test_ds, |_| Ok(()))
}

/// Full training loop; `on_epoch` sees each record as soon as it is
/// complete, so callers can stream metrics to disk.
pub fn train_with_observer(
    cfg: &TrainConfig,
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    mut on_epoch: impl FnMut(&MetricsRecord) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if train_ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let shape = train_ds.images.shape();
    let (in_channels, in_size) = (shape[1], shape[2]);
    if shape[2] != shape[3] {
        return Err(Error::Domain {
            op: "train",
            msg: format!("expected square images, got {}x{}", shape[2], shape[3]),
        });
    }

    let mut model = cfg.arch.build(
        in_channels,
        in_size,
        cfg.feature_dim,
        train_ds.class_count,
        &mut stream(cfg.seed, Domain::ModelInit),
    )?;
    let mut loss_state = LossState::with_params(
        train_ds.class_count,
        cfg.feature_dim,
        cfg.z,
        cfg.epsilon,
        cfg.n,
        cfg.lambda,
        cfg.temperature,
        &mut stream(cfg.seed, Domain::LossInit),
    )?;

    let model_names = model.param_names();
    let mut model_adam = AdamState::for_params(&model.params(), cfg.model_lr);
    let loss_names: Vec<String> = match cfg.aux_kind {
        AuxKind::Center => vec!["centers".into()],
        AuxKind::Sigma2r => vec!["centers".into(), "growth_weights".into()],
        AuxKind::None | AuxKind::Snn => Vec::new(),
    };
    let mut loss_adam = match cfg.aux_kind {
        AuxKind::Center => AdamState::for_params(&[&loss_state.centers], cfg.loss_lr),
        AuxKind::Sigma2r => AdamState::for_params(
            &[&loss_state.centers, &loss_state.growth_weights],
            cfg.loss_lr,
        ),
        AuxKind::None | AuxKind::Snn => AdamState::new(&[], cfg.loss_lr),
    };

    let mut sampler_rng = stream(cfg.seed, Domain::Sampler);
    let mut augment_rng = stream(cfg.seed, Domain::Augment);
    let augment_ops = if cfg.augment { AugmentOps::standard() } else { AugmentOps::none() };

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut global_batch = 0usize;
    for epoch in 0..cfg.epochs {
        let lr_model = cosine_lr(cfg.model_lr, epoch, cfg.epochs);
        let lr_loss = cosine_lr(cfg.loss_lr, epoch, cfg.epochs);
        let batches = balanced_batches(train_ds, cfg.batch_size, &mut sampler_rng)?;

        let mut sum_total = 0.0;
        let mut sum_xent = 0.0;
        let mut sum_aux = 0.0;
        for indices in &batches {
            let (mut images, labels) = train_ds.gather(indices);
            if cfg.augment {
                images = augment_batch(&images, &augment_ops, &mut augment_rng);
            }

            let tape = Tape::new();
            let bound = model.bind(&tape);
            let (logits, features) = bound.forward_with_features(&tape.constant(images))?;
            let binding = loss_state.bind(&tape);
            let out = joint_loss(&logits, &features, &labels, &binding, cfg.aux_kind)?;
            let total = out.total.item();
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    batch: global_batch,
                    details: format!(
                        "total={total}, xent={}, aux={}, lambda={}",
                        out.xent, out.aux, cfg.lambda
                    ),
                });
            }
            sum_total += total;
            sum_xent += out.xent;
            sum_aux += out.aux;
            out.total.backward()?;

            let grads: Vec<Option<Tensor>> =
                bound.param_vars().iter().map(|v| v.grad()).collect();
            adam_step(&mut model_adam, &mut model.params_mut(), &grads, &model_names, lr_model)?;

            match cfg.aux_kind {
                AuxKind::Center => {
                    let grads = [binding.centers.grad()];
                    adam_step(
                        &mut loss_adam,
                        &mut [&mut loss_state.centers],
                        &grads,
                        &loss_names,
                        lr_loss,
                    )?;
                }
                AuxKind::Sigma2r => {
                    let grads = [binding.centers.grad(), binding.growth_weights.grad()];
                    adam_step(
                        &mut loss_adam,
                        &mut [&mut loss_state.centers, &mut loss_state.growth_weights],
                        &grads,
                        &loss_names,
                        lr_loss,
                    )?;
                }
                AuxKind::None | AuxKind::Snn => {}
            }
            global_batch += 1;
        }

        let nb = batches.len() as f64;
        let train_eval = evaluate(&model, train_ds)?;
        let (test_accuracy, test_icj) = match test_ds {
            Some(ds) => {
                let e = evaluate(&model, ds)?;
                (e.accuracy, e.icj)
            }
            None => (f64::NAN, Vec::new()),
        };
        let record = MetricsRecord {
            epoch,
            train_accuracy: train_eval.accuracy,
            test_accuracy,
            total_loss: sum_total / nb,
            xent: sum_xent / nb,
            aux: sum_aux / nb,
            train_icj: train_eval.icj,
            test_icj,
            wk: loss_state.growth_weights.data().to_vec(),
        };
        on_epoch(&record)?;
        records.push(record);
    }

    Ok(TrainOutput { model, loss_state, records })
}

pub struct Evaluation {
    pub accuracy: f64,
    /// Per-class intra-class spread of the feature tap.
    pub icj: Vec<f64>,
    /// Feature-tap outputs, one row per sample.
    pub features: Tensor,
    pub labels: Vec<usize>,
}

const EVAL_CHUNK: usize = 256;

/// Accuracy and per-class feature spread over a full dataset, computed
/// without recording gradients.
pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len();
    let mut correct = 0usize;
    let mut features = Vec::with_capacity(n * model.feature_dim);
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let (images, labels) = dataset.gather(&indices);
        let (logits, feats) = model.forward_values(&images)?;
        for (r, &label) in labels.iter().enumerate() {
            let row = logits.row(r);
            let pred = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            if pred == label {
                correct += 1;
            }
        }
        features.extend_from_slice(feats.data());
        start = end;
    }
    let features = Tensor::from_parts(vec![n, model.feature_dim], features);
    let icj = intra_class_variance(&features, &dataset.labels, dataset.class_count);
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        icj,
        features,
        labels: dataset.labels.clone(),
    })
}

/// Per-class spread of feature rows: the square root of the mean (over
/// n_j - 1) squared distance to the class mean. Classes with fewer than
/// two samples report 0.
pub fn intra_class_variance(features: &Tensor, labels: &[usize], class_count: usize) -> Vec<f64> {
    let d = features.shape()[1];
    let mut sums = vec![vec![0.0; d]; class_count];
    let mut counts = vec![0usize; class_count];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &x) in sums[l].iter_mut().zip(features.row(i)) {
            *s += x;
        }
    }
    let mut acc = vec![0.0; class_count];
    for (i, &l) in labels.iter().enumerate() {
        if counts[l] < 2 {
            continue;
        }
        let mean_scale = 1.0 / counts[l] as f64;
        acc[l] += features
            .row(i)
            .iter()
            .zip(&sums[l])
            .map(|(&x, &s)| (x - s * mean_scale) * (x - s * mean_scale))
            .sum::<f64>();
    }
    (0..class_count)
        .map(|j| if counts[j] < 2 { 0.0 } else { (acc[j] / (counts[j] as f64 - 1.0)).sqrt() })
        .collect()
}
