use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::ChainDivergence;
use crate::nn::{Batch, MlpArchitecture, MlpModel};
use crate::{rng, Error, ParamVector, Result};

/// A loss `L_n(w)` over `n` examples that can also be evaluated, with its
/// gradient, on a mini-batch of example indices.
pub trait StochasticLoss {
    fn dim(&self) -> usize;

    /// Training-set size `n`.
    fn n(&self) -> usize;

    /// Mean loss over all `n` examples.
    fn full_loss(&self, w: &ParamVector) -> Result<f64>;

    /// Mean loss and its gradient over the given examples.
    fn batch_loss_grad(&self, w: &ParamVector, indices: &[usize]) -> Result<(f64, ParamVector)>;
}

/// Negative log-likelihood of an MLP over a dataset.
pub struct DatasetLoss<'a> {
    arch: MlpArchitecture,
    dataset: &'a Dataset,
    full: Batch,
}

impl<'a> DatasetLoss<'a> {
    pub fn new(arch: MlpArchitecture, dataset: &'a Dataset) -> Result<Self> {
        let full = dataset.to_batch()?;
        Ok(DatasetLoss { arch, dataset, full })
    }

    fn model(&self, w: &ParamVector) -> Result<MlpModel> {
        MlpModel::new(self.arch.clone(), w.clone())
    }
}

impl StochasticLoss for DatasetLoss<'_> {
    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn n(&self) -> usize {
        self.dataset.len()
    }

    fn full_loss(&self, w: &ParamVector) -> Result<f64> {
        self.model(w)?.nll_loss(&self.full)
    }

    fn batch_loss_grad(&self, w: &ParamVector, indices: &[usize]) -> Result<(f64, ParamVector)> {
        let batch = self.dataset.gather(indices)?;
        self.model(w)?.loss_and_grad(&batch)
    }
}

/// Which loss value is recorded at each draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossRecording {
    /// `n` times the mean loss on the mini-batch drawn for that step (free:
    /// it comes out of the gradient pass).
    #[default]
    Batch,
    /// `n` times the mean loss over the whole training set.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgldConfig {
    #[serde(default = "defaults::step_size")]
    pub step_size: f64,
    /// Inverse temperature; `1 / ln n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::num_chains")]
    pub num_chains: usize,
    /// Steps per chain, burn-in included.
    #[serde(default = "defaults::draws_per_chain")]
    pub draws_per_chain: usize,
    #[serde(default = "defaults::burn_in")]
    pub burn_in: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Chains leaving this ball around `w*` are dropped. Defaults to
    /// `10 * max(|w*|, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_radius: Option<f64>,
    #[serde(default)]
    pub loss_recording: LossRecording,
    /// Keep every visited parameter vector (memory heavy for real models).
    #[serde(default)]
    pub record_samples: bool,
}

mod defaults {
    pub fn step_size() -> f64 {
        1e-5
    }
    pub fn gamma() -> f64 {
        100.0
    }
    pub fn num_chains() -> usize {
        4
    }
    pub fn draws_per_chain() -> usize {
        2000
    }
    pub fn burn_in() -> usize {
        200
    }
    pub fn batch_size() -> usize {
        128
    }
}

impl Default for SgldConfig {
    fn default() -> Self {
        SgldConfig {
            step_size: defaults::step_size(),
            beta: None,
            gamma: defaults::gamma(),
            num_chains: defaults::num_chains(),
            draws_per_chain: defaults::draws_per_chain(),
            burn_in: defaults::burn_in(),
            batch_size: defaults::batch_size(),
            seed: 0,
            divergence_radius: None,
            loss_recording: LossRecording::Batch,
            record_samples: false,
        }
    }
}

impl SgldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config(format!("SGLD step_size must be positive, got {}", self.step_size)));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config(format!("SGLD beta must be positive, got {b}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("SGLD gamma must be non-negative, got {}", self.gamma)));
        }
        if self.num_chains == 0 {
            return Err(Error::config("SGLD num_chains must be at least 1"));
        }
        if self.draws_per_chain <= self.burn_in {
            return Err(Error::config(format!(
                "SGLD draws_per_chain ({}) must exceed burn_in ({})",
                self.draws_per_chain, self.burn_in
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("SGLD batch_size must be at least 1"));
        }
        if let Some(r) = self.divergence_radius {
            if !(r > 0.0) {
                return Err(Error::config("SGLD divergence_radius must be positive"));
            }
        }
        Ok(())
    }

    /// The inverse temperature for a training set of size `n`.
    pub fn resolve_beta(&self, n: usize) -> Result<f64> {
        match self.beta {
            Some(b) => Ok(b),
            None if n >= 2 => Ok(1.0 / (n as f64).ln()),
            None => Err(Error::config("default beta = 1/ln(n) needs n >= 2")),
        }
    }
}

/// One SGLD chain. All series have one entry per step, burn-in included.
#[derive(Debug, Clone, PartialEq)]
pub struct SgldChain {
    pub index: usize,
    /// Recorded `n L_n(w_t)`.
    pub losses: Vec<f64>,
    /// `|w_t - w*|^2`.
    pub displacement_sq: Vec<f64>,
    pub samples: Option<Vec<ParamVector>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgldRun {
    /// Chains that stayed finite and inside the divergence radius.
    pub chains: Vec<SgldChain>,
    pub divergences: Vec<ChainDivergence>,
    pub beta: f64,
    pub n: usize,
    pub num_chains: usize,
}

enum ChainOutcome {
    Finished(SgldChain),
    Diverged(ChainDivergence),
}

fn run_chain<L: StochasticLoss + ?Sized>(
    loss: &L,
    w_star: &ParamVector,
    cfg: &SgldConfig,
    beta: f64,
    radius: f64,
    index: usize,
) -> Result<ChainOutcome> {
    let n = loss.n();
    let n_f = n as f64;
    let eps = cfg.step_size;
    let noise_scale = eps.sqrt();
    let drift_loss = beta * n_f;
    let mut r = rng::stream(cfg.seed, index as u64);

    let mut w = w_star.clone();
    let mut losses = Vec::with_capacity(cfg.draws_per_chain);
    let mut displacement_sq = Vec::with_capacity(cfg.draws_per_chain);
    let mut samples = cfg.record_samples.then(|| Vec::with_capacity(cfg.draws_per_chain));

    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let diverged = |step: usize, reason: String| {
        Ok(ChainOutcome::Diverged(ChainDivergence {
            chain: index,
            step,
            reason,
        }))
    };

    for t in 0..cfg.draws_per_chain {
        if cursor >= order.len() {
            order = rng::permutation(n, &mut r);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let indices = &order[cursor..end];
        cursor = end;

        let (batch_loss, grad) = match loss.batch_loss_grad(&w, indices) {
            Ok(v) => v,
            Err(Error::NonFinite { context, .. }) => return diverged(t, format!("non-finite {context}")),
            Err(e) => return Err(e),
        };
        let recorded = match cfg.loss_recording {
            LossRecording::Batch => n_f * batch_loss,
            LossRecording::Full => match loss.full_loss(&w) {
                Ok(l) => n_f * l,
                Err(Error::NonFinite { context, .. }) => return diverged(t, format!("non-finite {context}")),
                Err(e) => return Err(e),
            },
        };
        if !recorded.is_finite() {
            return diverged(t, "non-finite loss".into());
        }
        losses.push(recorded);
        displacement_sq.push(w.distance_sq(w_star));
        if let Some(s) = samples.as_mut() {
            s.push(w.clone());
        }

        let ws = w.as_mut_slice();
        let anchor = w_star.as_slice();
        for j in 0..ws.len() {
            let drift = -drift_loss * grad[j] + cfg.gamma * (anchor[j] - ws[j]);
            let xi: f64 = r.sample(StandardNormal);
            ws[j] += 0.5 * eps * drift + noise_scale * xi;
        }
        if let Some(j) = w.first_non_finite() {
            return diverged(t, format!("non-finite parameter {j}"));
        }
        let dist = w.distance_sq(w_star).sqrt();
        if dist > radius {
            return diverged(t, format!("left radius {radius:e} (distance {dist:e})"));
        }
    }

    Ok(ChainOutcome::Finished(SgldChain {
        index,
        losses,
        displacement_sq,
        samples,
    }))
}

/// Runs `num_chains` independent SGLD chains from `w*`:
///
/// `w <- w + (eps/2) (-beta n grad L_batch(w) + gamma (w* - w)) + N(0, eps)`
///
/// with `N(0, eps)` of variance `eps` per coordinate. Chains that diverge
/// are reported and dropped; more than half diverging is an error.
pub fn sgld_sample<L: StochasticLoss + ?Sized>(loss: &L, w_star: &ParamVector, cfg: &SgldConfig) -> Result<SgldRun> {
    cfg.validate()?;
    if w_star.len() != loss.dim() {
        return Err(Error::config(format!(
            "w* has length {}, loss expects {}",
            w_star.len(),
            loss.dim()
        )));
    }
    if loss.n() == 0 {
        return Err(Error::config("SGLD needs a non-empty training set"));
    }
    let beta = cfg.resolve_beta(loss.n())?;
    let radius = cfg
        .divergence_radius
        .unwrap_or_else(|| 10.0 * w_star.norm().max(1.0));

    let mut chains = Vec::with_capacity(cfg.num_chains);
    let mut divergences = Vec::new();
    for index in 0..cfg.num_chains {
        match run_chain(loss, w_star, cfg, beta, radius, index)? {
            ChainOutcome::Finished(c) => chains.push(c),
            ChainOutcome::Diverged(d) => divergences.push(d),
        }
    }
    if 2 * divergences.len() > cfg.num_chains {
        return Err(Error::Divergence {
            chains: cfg.num_chains,
            report: divergences,
        });
    }
    Ok(SgldRun {
        chains,
        divergences,
        beta,
        n: loss.n(),
        num_chains: cfg.num_chains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slt::{AnalyticPotential, PotentialLoss};

    #[test]
    fn infinite_confinement_pins_chain_to_w_star() {
        let loss = PotentialLoss {
            potential: AnalyticPotential::quadratic_2d(1.0),
            n: 1000,
        };
        let w_star = ParamVector::from_vec(vec![0.2, -0.1]);
        // gamma * eps / 2 = 1 removes the previous position entirely; what
        // remains is noise of std sqrt(eps) plus a tiny loss drift.
        let cfg = SgldConfig {
            step_size: 2e-12,
            gamma: 1e12,
            num_chains: 2,
            draws_per_chain: 300,
            burn_in: 10,
            ..Default::default()
        };
        let run = sgld_sample(&loss, &w_star, &cfg).unwrap();
        let nl_star = 1000.0 * (0.04 + 0.01);
        for c in &run.chains {
            assert!(c.displacement_sq.iter().all(|&d| d.sqrt() < 1e-3));
            assert!(c.losses.iter().all(|&l| (l - nl_star).abs() < 1.0));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let loss = PotentialLoss {
            potential: AnalyticPotential::degenerate_2d(1.0),
            n: 500,
        };
        let w = ParamVector::zeros(2);
        let cfg = SgldConfig {
            step_size: 1e-4,
            draws_per_chain: 100,
            burn_in: 10,
            seed: 42,
            ..Default::default()
        };
        let a = sgld_sample(&loss, &w, &cfg).unwrap();
        let b = sgld_sample(&loss, &w, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergent_chains_are_reported() {
        // Unstable step on a stiff quadratic: every chain blows up.
        let loss = PotentialLoss {
            potential: AnalyticPotential::quadratic_2d(1.0),
            n: 100_000,
        };
        let cfg = SgldConfig {
            step_size: 1.0,
            beta: Some(1.0),
            draws_per_chain: 50,
            burn_in: 1,
            ..Default::default()
        };
        let err = sgld_sample(&loss, &ParamVector::from_vec(vec![0.5, 0.5]), &cfg).unwrap_err();
        match err {
            Error::Divergence { chains, report } => {
                assert_eq!(chains, 4);
                assert_eq!(report.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_checks() {
        let mut cfg = SgldConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.burn_in = cfg.draws_per_chain;
        assert!(cfg.validate().is_err());
        let cfg = SgldConfig {
            step_size: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!((SgldConfig::default().resolve_beta(100).unwrap() - 1.0 / 100f64.ln()).abs() < 1e-15);
        assert!(SgldConfig::default().resolve_beta(1).is_err());
    }
}
