//! Training laboratory for a variance-weighted center loss.
//!
//! The crate bundles everything the experiments need: a reverse-mode
//! autodiff tape, small convolutional models, the loss family under study
//! ([`losses::sigma2r_loss`] and its baselines), deterministic data
//! pipelines, and a training harness with CSV metrics and SVG plots.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod plot;
pub mod report;
pub mod train;
pub mod rng;
pub mod tensor;

pub use autodiff::{concat, Tape, Var};
pub use error::{Error, Result};
pub use losses::{AuxKind, LossBinding, LossOutput, LossState};
pub use tensor::Tensor;
