//! Error type shared across the workspace.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("backward already ran on this tape; rebuild the forward pass first")]
    BackwardConsumed,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("degenerate batch for SNN")]
    DegenerateSnnBatch,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("missing gradient for parameter {0}")]
    MissingGradient(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("non-finite loss at batch {batch}: {details}")]
    NonFiniteLoss { batch: usize, details: String },

    #[error("plot error: {0}")]
    Plot(String),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable one-word category, used by the CLI for machine-parsable exits.
    pub fn category(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape",
            Error::Domain { .. } => "domain",
            Error::NonScalarRoot(_) | Error::BackwardConsumed => "autodiff",
            Error::LabelOutOfRange { .. }
            | Error::DegenerateSnnBatch
            | Error::EmptyBatch
            | Error::EmptyDataset => "data",
            Error::MissingGradient(_) | Error::NonFiniteLoss { .. } => "train",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Plot(_) => "plot",
            Error::Report(_) => "report",
            Error::Io(_) => "io",
        }
    }
}
