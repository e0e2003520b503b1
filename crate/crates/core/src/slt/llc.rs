use serde::{Deserialize, Serialize};

use super::sgld::{sgld_sample, DatasetLoss, SgldConfig, SgldRun, StochasticLoss};
use crate::data::Dataset;
use crate::error::ChainDivergence;
use crate::nn::MlpModel;
use crate::{Error, ParamVector, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlcEstimate {
    /// Mean of `per_chain_lambda`.
    pub lambda_hat: f64,
    /// Standard error of the mean across chains; 0 with a single chain.
    pub std_error: f64,
    /// Posterior mean of `n L_n(w)` over all kept post-burn-in draws.
    pub wbic: f64,
    /// `n L_n(w*)`.
    pub loss_at_w_star: f64,
    pub n: usize,
    pub beta: f64,
    pub per_chain_lambda: Vec<f64>,
    pub divergences: Vec<ChainDivergence>,
}

impl LlcEstimate {
    fn from_run(run: &SgldRun, loss_at_w_star: f64, burn_in: usize) -> Self {
        // Differences to n L_n(w*) are averaged directly so a flat landscape
        // gives exactly zero.
        let gaps: Vec<f64> = run
            .chains
            .iter()
            .map(|c| {
                let kept = &c.losses[burn_in..];
                kept.iter().map(|l| l - loss_at_w_star).sum::<f64>() / kept.len() as f64
            })
            .collect();
        let k = gaps.len() as f64;
        let per_chain_lambda: Vec<f64> = gaps.iter().map(|g| run.beta * g).collect();
        let mean_gap = gaps.iter().sum::<f64>() / k;
        let lambda_hat = per_chain_lambda.iter().sum::<f64>() / k;
        let std_error = if gaps.len() > 1 {
            let var = per_chain_lambda
                .iter()
                .map(|l| (l - lambda_hat) * (l - lambda_hat))
                .sum::<f64>()
                / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        LlcEstimate {
            lambda_hat,
            std_error,
            wbic: loss_at_w_star + mean_gap,
            loss_at_w_star,
            n: run.n,
            beta: run.beta,
            per_chain_lambda,
            divergences: run.divergences.clone(),
        }
    }
}

/// Local learning coefficient at `w*` for any [`StochasticLoss`].
pub fn estimate_llc_with<L: StochasticLoss + ?Sized>(
    loss: &L,
    w_star: &ParamVector,
    cfg: &SgldConfig,
) -> Result<LlcEstimate> {
    cfg.validate()?;
    let loss_at_w_star = loss.n() as f64 * loss.full_loss(w_star)?;
    if !loss_at_w_star.is_finite() {
        return Err(Error::NonFinite {
            context: "n L_n(w*)".into(),
            index: 0,
        });
    }
    let run = sgld_sample(loss, w_star, cfg)?;
    Ok(LlcEstimate::from_run(&run, loss_at_w_star, cfg.burn_in))
}

/// Local learning coefficient of a model over its training set, with the
/// current parameters as `w*`.
pub fn estimate_llc(model: &MlpModel, dataset: &Dataset, cfg: &SgldConfig) -> Result<LlcEstimate> {
    let loss = DatasetLoss::new(model.architecture().clone(), dataset)?;
    estimate_llc_with(&loss, model.params(), cfg)
}

/// WBIC from the same sampling pass as [`estimate_llc_with`].
pub fn estimate_wbic_with<L: StochasticLoss + ?Sized>(loss: &L, w_star: &ParamVector, cfg: &SgldConfig) -> Result<f64> {
    Ok(estimate_llc_with(loss, w_star, cfg)?.wbic)
}

pub fn estimate_wbic(model: &MlpModel, dataset: &Dataset, cfg: &SgldConfig) -> Result<f64> {
    Ok(estimate_llc(model, dataset, cfg)?.wbic)
}
