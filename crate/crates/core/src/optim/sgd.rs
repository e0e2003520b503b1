use serde::{Deserialize, Serialize};

use super::StepResult;
use crate::error::ensure_finite;
use crate::nn::{Batch, MlpModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

pub(crate) fn default_batch_size() -> usize {
    128
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 1e-2,
            batch_size: default_batch_size(),
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "SGD learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// `w <- w - lr * grad L(w)` on one batch.
pub fn sgd_step(model: &MlpModel, batch: &Batch, cfg: &SgdConfig) -> Result<StepResult> {
    cfg.validate()?;
    let g = model.grad(batch)?;
    let mut new_params = model.params().clone();
    new_params.axpy(-cfg.learning_rate, &g);
    ensure_finite(new_params.as_slice(), "parameters after SGD step")?;
    let update_norm = new_params.sub(model.params()).norm();
    Ok(StepResult {
        new_params,
        update_norm,
        kappa: 0.0,
        cg_iterations: 0,
        relative_residual: 0.0,
    })
}
