use serde::{Deserialize, Serialize};

use super::dense::{dense_fisher, solve_dense_smoothed};
use super::{conjugate_gradient, StepResult};
use crate::error::ensure_finite;
use crate::nn::{Batch, FisherOperator, MlpModel};
use crate::params::axpy;
use crate::{Error, ParamVector, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgdSolver {
    /// Explicit `d x d` matrix and Cholesky solve; only for small models.
    DenseInverse,
    #[default]
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgdConfig {
    pub learning_rate: f64,
    pub alpha: f64,
    pub epsilon_smooth: f64,
    #[serde(default = "super::sgd::default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub solver: NgdSolver,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    /// Defaults to `10 * d` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_max_iters: Option<usize>,
}

fn default_cg_tol() -> f64 {
    1e-10
}

impl Default for NgdConfig {
    fn default() -> Self {
        NgdConfig {
            learning_rate: 1e-2,
            alpha: 1e-2,
            epsilon_smooth: 1e-10,
            batch_size: super::sgd::default_batch_size(),
            solver: NgdSolver::ConjugateGradient,
            cg_tol: default_cg_tol(),
            cg_max_iters: None,
        }
    }
}

impl NgdConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("NGD {name} must be positive, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("alpha", self.alpha)?;
        positive("epsilon_smooth", self.epsilon_smooth)?;
        positive("cg_tol", self.cg_tol)?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.cg_max_iters == Some(0) {
            return Err(Error::config("cg_max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// `kappa = (alpha / d) * max(trace, epsilon)`.
pub fn smoothing_kappa(fisher_trace: f64, alpha: f64, epsilon: f64, d: usize) -> f64 {
    debug_assert!(d >= 1);
    alpha / d as f64 * fisher_trace.max(epsilon)
}

/// `w <- w - lr * (F + kappa I)^{-1} grad L(w)` with `F` the empirical
/// Fisher of this batch and `kappa` recomputed from its trace.
pub fn ngd_step(model: &MlpModel, batch: &Batch, cfg: &NgdConfig) -> Result<StepResult> {
    cfg.validate()?;
    let d = model.param_count();
    let fisher = FisherOperator::new(model, batch)?;
    let grad = fisher.gradient();
    ensure_finite(grad.as_slice(), "gradient")?;
    let kappa = smoothing_kappa(fisher.trace(), cfg.alpha, cfg.epsilon_smooth, d);
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::NonFinite {
            context: "Fisher smoothing kappa".into(),
            index: 0,
        });
    }

    let apply = |p: &[f64]| -> Result<Vec<f64>> {
        let pv = ParamVector::from_vec(p.to_vec());
        let mut out = fisher.apply(&pv)?.into_vec();
        axpy(kappa, p, &mut out);
        Ok(out)
    };

    let (direction, iterations, residual) = match cfg.solver {
        NgdSolver::ConjugateGradient => {
            let max_iters = cfg.cg_max_iters.unwrap_or(10 * d);
            let out = conjugate_gradient(apply, grad.as_slice(), cfg.cg_tol, max_iters)?;
            (ParamVector::from_vec(out.solution), out.iterations, out.relative_residual)
        }
        NgdSolver::DenseInverse => {
            let f = dense_fisher(model, batch)?;
            let u = solve_dense_smoothed(&f, kappa, &grad)?;
            let g_norm = grad.norm();
            let residual = if g_norm == 0.0 {
                0.0
            } else {
                let au = apply(u.as_slice())?;
                let r: f64 = au
                    .iter()
                    .zip(grad.iter())
                    .map(|(a, g)| (a - g) * (a - g))
                    .sum();
                r.sqrt() / g_norm
            };
            (u, 0, residual)
        }
    };
    ensure_finite(direction.as_slice(), "natural gradient direction")?;

    let mut new_params = model.params().clone();
    new_params.axpy(-cfg.learning_rate, &direction);
    ensure_finite(new_params.as_slice(), "parameters after NGD step")?;
    let update_norm = new_params.sub(model.params()).norm();
    Ok(StepResult {
        new_params,
        update_norm,
        kappa,
        cg_iterations: iterations,
        relative_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_floor_branch() {
        let k = smoothing_kappa(0.0, 1e-2, 1e-10, 100);
        assert!((k - 1e-14).abs() < 1e-28);
    }

    #[test]
    fn kappa_trace_branch() {
        let k = smoothing_kappa(10.0, 1e-2, 1e-10, 100);
        assert!((k - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn kappa_is_monotone_in_alpha_and_epsilon() {
        let alphas = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
        let eps = [1e-12, 1e-8, 1e-4, 1.0, 100.0];
        for &trace in &[0.0, 0.5, 3.0] {
            for w in alphas.windows(2) {
                assert!(smoothing_kappa(trace, w[0], 1e-6, 50) <= smoothing_kappa(trace, w[1], 1e-6, 50));
            }
            for w in eps.windows(2) {
                assert!(smoothing_kappa(trace, 0.1, w[0], 50) <= smoothing_kappa(trace, 0.1, w[1], 50));
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = NgdConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = NgdConfig {
            epsilon_smooth: -1.0,
            ..NgdConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = NgdConfig {
            cg_tol: 0.0,
            ..NgdConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
