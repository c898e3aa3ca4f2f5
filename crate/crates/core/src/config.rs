//! Flat `key = value` run configuration: diff-able, comment-friendly,
//! and round-trippable through [`render_config`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::{cifar, fuzzy, idx, Dataset, Split};
use crate::error::{Error, Result};
use crate::losses;
use crate::nn::Arch;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSpec {
    /// Synthetic three-class color blobs, generated on the fly.
    Fuzzy { per_class: usize, data_seed: u64 },
    /// An IDX pair for training, optionally a second pair for testing.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
    },
    /// CIFAR-10 binary archive directory (train and test batches).
    Cifar10 { dir: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<(Dataset, Option<Dataset>)> {
        match self {
            DatasetSpec::Fuzzy { per_class, data_seed } => {
                Ok((fuzzy::generate_fuzzy_rgb(*per_class, *data_seed)?, None))
            }
            DatasetSpec::Idx { train_images, train_labels, test_images, test_labels } => {
                let train = idx::load_idx(train_images, train_labels, Split::Train)?;
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => Some(idx::load_idx(i, l, Split::Test)?),
                    _ => None,
                };
                Ok((train, test))
            }
            DatasetSpec::Cifar10 { dir } => {
                let (train, test) = cifar::load_cifar10_binary(dir)?;
                Ok((train, Some(test)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    /// Human-readable notes about defaulted keys, for the run log.
    pub notices: Vec<String>,
}

struct Parsed {
    entries: BTreeMap<String, String>,
    consumed: std::collections::BTreeSet<String>,
}

impl Parsed {
    fn take(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::Config(format!("{key}: missing required key")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| Error::Config(format!("{key}: invalid value {raw:?} ({e})"))),
        }
    }

    fn parse_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.required(key)?;
        raw.parse()
            .map_err(|e| Error::Config(format!("{key}: invalid value {raw:?} ({e})")))
    }

    fn leftovers(&self) -> Option<String> {
        self.entries
            .keys()
            .find(|k| !self.consumed.contains(*k))
            .cloned()
    }
}

fn split_lines(text: &str) -> Result<Parsed> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key = value, got {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if entries.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("{key}: duplicate key")));
        }
    }
    Ok(Parsed { entries, consumed: Default::default() })
}

/// Parse a config file. Most keys have documented defaults; `dataset`,
/// `epochs`, `batch_size`, and `aux_kind` are required.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    let mut p = split_lines(text)?;
    let mut notices = Vec::new();

    let dataset = match p.required("dataset")?.as_str() {
        "fuzzy" => DatasetSpec::Fuzzy {
            per_class: p.parse("per_class", 300usize)?,
            data_seed: p.parse("data_seed", 0u64)?,
        },
        "idx" => DatasetSpec::Idx {
            train_images: PathBuf::from(p.required("train_images")?),
            train_labels: PathBuf::from(p.required("train_labels")?),
            test_images: p.take("test_images").map(PathBuf::from),
            test_labels: p.take("test_labels").map(PathBuf::from),
        },
        "cifar10" => DatasetSpec::Cifar10 { dir: PathBuf::from(p.required("cifar_dir")?) },
        other => {
            return Err(Error::Config(format!(
                "dataset: unknown dataset {other:?}, expected one of {{fuzzy, idx, cifar10}}"
            )))
        }
    };

    let (default_arch, default_model_lr) = match &dataset {
        DatasetSpec::Fuzzy { .. } => (Arch::SmallConvnet, 0.01),
        DatasetSpec::Idx { .. } => (Arch::Lenet, 0.001),
        DatasetSpec::Cifar10 { .. } => (Arch::SmallConvnet, 0.4),
    };

    let lambda = match p.take("lambda") {
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::Config(format!("lambda: invalid value {raw:?}")))?,
        None => {
            notices.push(format!(
                "lambda not set; defaulting to {}",
                losses::DEFAULT_LAMBDA
            ));
            losses::DEFAULT_LAMBDA
        }
    };

    let train = TrainConfig {
        arch: p.parse("arch", default_arch)?,
        feature_dim: p.parse("feature_dim", 2usize)?,
        epochs: p.parse_required("epochs")?,
        batch_size: p.parse_required("batch_size")?,
        model_lr: p.parse("model_lr", default_model_lr)?,
        loss_lr: p.parse("loss_lr", 0.1)?,
        aux_kind: p.parse_required("aux_kind")?,
        lambda,
        z: p.parse("z", losses::DEFAULT_Z)?,
        n: p.parse("n", losses::DEFAULT_NEIGHBORS)?,
        epsilon: p.parse("epsilon", losses::DEFAULT_EPSILON)?,
        temperature: p.parse("temperature", losses::DEFAULT_TEMPERATURE)?,
        seed: p.parse("seed", 0u64)?,
        augment: p.parse("augment", false)?,
    };
    train.validate()?;

    let metrics_path = p.take("metrics").map(PathBuf::from);
    let checkpoint_path = p.take("checkpoint").map(PathBuf::from);

    if let Some(key) = p.leftovers() {
        return Err(Error::Config(format!("{key}: unknown key")));
    }
    Ok(RunSpec { train, dataset, metrics_path, checkpoint_path, notices })
}

pub fn load_config(path: &Path) -> Result<RunSpec> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Canonical full snapshot of a run spec; parsing it back yields the
/// same spec with no notices.
pub fn render_config(spec: &RunSpec) -> String {
    let mut lines = Vec::new();
    match &spec.dataset {
        DatasetSpec::Fuzzy { per_class, data_seed } => {
            lines.push("dataset = fuzzy".to_string());
            lines.push(format!("per_class = {per_class}"));
            lines.push(format!("data_seed = {data_seed}"));
        }
        DatasetSpec::Idx { train_images, train_labels, test_images, test_labels } => {
            lines.push("dataset = idx".to_string());
            lines.push(format!("train_images = {}", train_images.display()));
            lines.push(format!("train_labels = {}", train_labels.display()));
            if let Some(p) = test_images {
                lines.push(format!("test_images = {}", p.display()));
            }
            if let Some(p) = test_labels {
                lines.push(format!("test_labels = {}", p.display()));
            }
        }
        DatasetSpec::Cifar10 { dir } => {
            lines.push("dataset = cifar10".to_string());
            lines.push(format!("cifar_dir = {}", dir.display()));
        }
    }
    let t = &spec.train;
    lines.push(format!("arch = {}", t.arch));
    lines.push(format!("feature_dim = {}", t.feature_dim));
    lines.push(format!("epochs = {}", t.epochs));
    lines.push(format!("batch_size = {}", t.batch_size));
    lines.push(format!("model_lr = {}", t.model_lr));
    lines.push(format!("loss_lr = {}", t.loss_lr));
    lines.push(format!("aux_kind = {}", t.aux_kind));
    lines.push(format!("lambda = {}", t.lambda));
    lines.push(format!("z = {}", t.z));
    lines.push(format!("n = {}", t.n));
    lines.push(format!("epsilon = {}", t.epsilon));
    lines.push(format!("temperature = {}", t.temperature));
    lines.push(format!("seed = {}", t.seed));
    lines.push(format!("augment = {}", t.augment));
    if let Some(p) = &spec.metrics_path {
        lines.push(format!("metrics = {}", p.display()));
    }
    if let Some(p) = &spec.checkpoint_path {
        lines.push(format!("checkpoint = {}", p.display()));
    }
    lines.join("\n") + "\n"
}
