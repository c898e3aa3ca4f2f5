//! Composable layers and the two reference backbones.
//!
//! Models are plain parameter containers; for each training step the
//! parameters are registered on a fresh tape via [`Model::bind`] and the
//! forward pass is rebuilt. [`BoundModel::forward_with_features`] returns
//! both the logits and the activations at the feature tap, recorded on
//! the same tape so the joint loss backpropagates through the shared
//! trunk exactly once.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PRELU_INIT_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Lenet,
    SmallConvnet,
}

impl Arch {
    pub const ALL: [Arch; 2] = [Arch::Lenet, Arch::SmallConvnet];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Lenet => "lenet",
            Arch::SmallConvnet => "small_convnet",
        }
    }

    pub fn build(
        self,
        in_channels: usize,
        in_size: usize,
        feature_dim: usize,
        num_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Model> {
        match self {
            Arch::Lenet => build_lenet(in_channels, in_size, feature_dim, num_classes, rng),
            Arch::SmallConvnet => {
                build_small_convnet(in_channels, in_size, feature_dim, num_classes, rng)
            }
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Arch> {
        match s {
            "lenet" => Ok(Arch::Lenet),
            "small_convnet" => Ok(Arch::SmallConvnet),
            other => Err(Error::Config(format!(
                "unknown arch {other:?}, expected one of {{lenet, small_convnet}}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, pad: usize },
    Dense { inputs: usize, outputs: usize },
    Prelu,
    MaxPool2x2,
    Flatten,
}

/// One layer: its shape contract plus its learnable tensors
/// (conv and dense: weight then bias; prelu: the slope; the rest: none).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Tensor>,
}

impl Layer {
    fn conv2d(in_ch: usize, out_ch: usize, kernel: usize, pad: usize, rng: &mut ChaCha8Rng) -> Layer {
        let fan_in = in_ch * kernel * kernel;
        Layer {
            spec: LayerSpec::Conv2d { in_ch, out_ch, kernel, pad },
            params: vec![
                kaiming_uniform(vec![out_ch, in_ch, kernel, kernel], fan_in, rng),
                Tensor::zeros(vec![out_ch]),
            ],
        }
    }

    fn dense(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Layer {
        Layer {
            spec: LayerSpec::Dense { inputs, outputs },
            params: vec![
                kaiming_uniform(vec![inputs, outputs], inputs, rng),
                Tensor::zeros(vec![outputs]),
            ],
        }
    }

    fn prelu() -> Layer {
        Layer {
            spec: LayerSpec::Prelu,
            params: vec![Tensor::scalar(PRELU_INIT_SLOPE)],
        }
    }

    fn pool() -> Layer {
        Layer { spec: LayerSpec::MaxPool2x2, params: Vec::new() }
    }

    fn flatten() -> Layer {
        Layer { spec: LayerSpec::Flatten, params: Vec::new() }
    }
}

fn kaiming_uniform(shape: Vec<usize>, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    Tensor::from_parts(shape, (0..n).map(|_| rng.random_range(-bound..bound)).collect())
}

/// Ordered layers with a designated feature tap: the index of the layer
/// whose output is the deep-feature vector fed to the auxiliary loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub layers: Vec<Layer>,
    pub feature_tap: usize,
    pub feature_dim: usize,
    /// Expected input as (channels, height, width).
    pub input_shape: (usize, usize, usize),
}

impl Model {
    /// Flat view of every learnable tensor, in deterministic order.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.iter().map(|p| p.numel()).sum::<usize>()).sum()
    }

    /// Stable names aligned with [`Model::params`], for optimizer
    /// diagnostics.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer.spec {
                LayerSpec::Conv2d { .. } => {
                    names.push(format!("layer{i}.conv2d.weight"));
                    names.push(format!("layer{i}.conv2d.bias"));
                }
                LayerSpec::Dense { .. } => {
                    names.push(format!("layer{i}.dense.weight"));
                    names.push(format!("layer{i}.dense.bias"));
                }
                LayerSpec::Prelu => names.push(format!("layer{i}.prelu.slope")),
                LayerSpec::MaxPool2x2 | LayerSpec::Flatten => {}
            }
        }
        names
    }

    /// Register every parameter on `tape` as a gradient-tracking variable.
    pub fn bind(&self, tape: &Tape) -> BoundModel {
        self.bind_impl(tape, true)
    }

    /// Register parameters as constants, for gradient-free evaluation.
    pub fn bind_frozen(&self, tape: &Tape) -> BoundModel {
        self.bind_impl(tape, false)
    }

    fn bind_impl(&self, tape: &Tape, trainable: bool) -> BoundModel {
        let layers = self
            .layers
            .iter()
            .map(|l| BoundLayer {
                spec: l.spec,
                params: l
                    .params
                    .iter()
                    .map(|p| {
                        if trainable {
                            tape.variable(p.clone())
                        } else {
                            tape.constant(p.clone())
                        }
                    })
                    .collect(),
            })
            .collect();
        BoundModel { layers, feature_tap: self.feature_tap }
    }

    /// Logits and features as plain tensors, without recording gradients.
    pub fn forward_values(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let tape = Tape::new();
        let bound = self.bind_frozen(&tape);
        let (logits, features) = bound.forward_with_features(&tape.constant(x.clone()))?;
        Ok((logits.value(), features.value()))
    }
}

pub struct BoundLayer {
    pub spec: LayerSpec,
    pub params: Vec<Var>,
}

impl BoundLayer {
    fn forward(&self, x: &Var) -> Result<Var> {
        match self.spec {
            LayerSpec::Conv2d { pad, .. } => x.conv2d(&self.params[0], &self.params[1], pad),
            LayerSpec::Dense { outputs, .. } => {
                let m = x.shape()[0];
                let h = x.matmul(&self.params[0])?;
                h.add(&self.params[1].reshape(vec![1, outputs])?.broadcast_to(m)?)
            }
            LayerSpec::Prelu => x.prelu(&self.params[0]),
            LayerSpec::MaxPool2x2 => x.maxpool2x2(),
            LayerSpec::Flatten => {
                let s = x.shape();
                let rest: usize = s[1..].iter().product();
                x.reshape(vec![s[0], rest])
            }
        }
    }
}

/// A model with its parameters registered on a tape for one pass.
pub struct BoundModel {
    pub layers: Vec<BoundLayer>,
    pub feature_tap: usize,
}

impl BoundModel {
    /// Run the full stack, returning the classifier logits and the
    /// activations at the feature tap.
    pub fn forward_with_features(&self, x: &Var) -> Result<(Var, Var)> {
        let mut h = x.clone();
        let mut features = None;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i == self.feature_tap {
                features = Some(h.clone());
            }
        }
        let features = features.ok_or_else(|| Error::Domain {
            op: "forward_with_features",
            msg: format!("feature tap {} beyond {} layers", self.feature_tap, self.layers.len()),
        })?;
        Ok((h, features))
    }

    /// Flat parameter variables, aligned with [`Model::params`].
    pub fn param_vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|l| l.params.iter().cloned()).collect()
    }
}

/// Classic two-conv-block LeNet with PReLU activations. The feature tap
/// sits on the activation after the `feature_dim`-wide dense layer,
/// immediately before the classifier head.
pub fn build_lenet(
    in_channels: usize,
    in_size: usize,
    feature_dim: usize,
    num_classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Model> {
    if in_size != 28 && in_size != 32 {
        return Err(Error::Config(format!(
            "LeNet supports input sizes 28 and 32, got {in_size}"
        )));
    }
    if feature_dim < 2 {
        return Err(Error::Config(format!("feature_dim must be >= 2, got {feature_dim}")));
    }
    let after_pools = in_size / 4;
    let flat = 16 * after_pools * after_pools;
    let layers = vec![
        Layer::conv2d(in_channels, 6, 5, 2, rng),
        Layer::prelu(),
        Layer::pool(),
        Layer::conv2d(6, 16, 5, 2, rng),
        Layer::prelu(),
        Layer::pool(),
        Layer::flatten(),
        Layer::dense(flat, 120, rng),
        Layer::prelu(),
        Layer::dense(120, feature_dim, rng),
        Layer::prelu(),
        Layer::dense(feature_dim, num_classes, rng),
    ];
    let feature_tap = layers.len() - 2;
    Ok(Model {
        layers,
        feature_tap,
        feature_dim,
        input_shape: (in_channels, in_size, in_size),
    })
}

/// Three conv blocks and a dense neck for 32x32 inputs; the desk-scale
/// stand-in for a deep residual backbone.
pub fn build_small_convnet(
    in_channels: usize,
    in_size: usize,
    feature_dim: usize,
    num_classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Model> {
    if in_size != 32 {
        return Err(Error::Config(format!(
            "SmallConvNet supports input size 32, got {in_size}"
        )));
    }
    if feature_dim < 2 {
        return Err(Error::Config(format!("feature_dim must be >= 2, got {feature_dim}")));
    }
    let layers = vec![
        Layer::conv2d(in_channels, 8, 3, 1, rng),
        Layer::prelu(),
        Layer::pool(),
        Layer::conv2d(8, 16, 3, 1, rng),
        Layer::prelu(),
        Layer::pool(),
        Layer::conv2d(16, 32, 3, 1, rng),
        Layer::prelu(),
        Layer::pool(),
        Layer::flatten(),
        Layer::dense(32 * 4 * 4, feature_dim, rng),
        Layer::prelu(),
        Layer::dense(feature_dim, num_classes, rng),
    ];
    let feature_tap = layers.len() - 2;
    Ok(Model {
        layers,
        feature_tap,
        feature_dim,
        input_shape: (in_channels, 32, 32),
    })
}
