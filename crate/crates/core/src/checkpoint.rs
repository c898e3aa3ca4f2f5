//! Versioned JSON checkpoints bundling the model and the loss state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossState;
use crate::nn::Model;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Model,
    pub loss_state: LossState,
}

pub fn save_checkpoint(path: &Path, model: &Model, loss_state: &LossState) -> Result<()> {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        model: model.clone(),
        loss_state: loss_state.clone(),
    };
    let json = serde_json::to_string_pretty(&ckpt).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            path: path.display().to_string(),
            msg: format!("checkpoint version {} unsupported, expected {CHECKPOINT_VERSION}", ckpt.version),
        });
    }
    ckpt.loss_state.validate()?;
    Ok(ckpt)
}
