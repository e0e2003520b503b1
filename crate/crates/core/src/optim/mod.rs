//! SGD and smoothed natural gradient updates.

mod cg;
mod dense;
mod ngd;
mod sgd;

pub use cg::{conjugate_gradient, CgOutcome};
pub use dense::{dense_fisher, solve_dense_smoothed};
pub use ngd::{ngd_step, smoothing_kappa, NgdConfig, NgdSolver};
pub use sgd::{sgd_step, SgdConfig};

use serde::{Deserialize, Serialize};

use crate::nn::{Batch, MlpModel};
use crate::{ParamVector, Result};

/// Outcome of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub new_params: ParamVector,
    /// `|w_{n+1} - w_n|_2`
    pub update_norm: f64,
    /// Fisher smoothing used for this step; 0 for SGD.
    pub kappa: f64,
    /// Conjugate-gradient iterations; 0 for SGD and the dense solver.
    pub cg_iterations: usize,
    /// Final relative residual of the linear solve; 0 for SGD.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd(SgdConfig),
    Ngd(NgdConfig),
}

impl OptimizerConfig {
    pub fn batch_size(&self) -> usize {
        match self {
            OptimizerConfig::Sgd(c) => c.batch_size,
            OptimizerConfig::Ngd(c) => c.batch_size,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd(c) => c.learning_rate,
            OptimizerConfig::Ngd(c) => c.learning_rate,
        }
    }

    pub fn with_learning_rate(&self, lr: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            OptimizerConfig::Sgd(c) => c.learning_rate = lr,
            OptimizerConfig::Ngd(c) => c.learning_rate = lr,
        }
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Sgd(_) => "sgd",
            OptimizerConfig::Ngd(_) => "ngd",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Sgd(c) => c.validate(),
            OptimizerConfig::Ngd(c) => c.validate(),
        }
    }

    pub fn step(&self, model: &MlpModel, batch: &Batch) -> Result<StepResult> {
        match self {
            OptimizerConfig::Sgd(c) => sgd_step(model, batch, c),
            OptimizerConfig::Ngd(c) => ngd_step(model, batch, c),
        }
    }
}
