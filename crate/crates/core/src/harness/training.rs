use serde::{Deserialize, Serialize};

use super::config::{MetricsConfig, PreparedData, RunConfig};
use crate::data::batches;
use crate::hessian::{hutchinson_trace, HutchinsonConfig};
use crate::nn::{Batch, MlpArchitecture, MlpModel};
use crate::optim::OptimizerConfig;
use crate::slt::{estimate_llc, SgldConfig};
use crate::{rng, Error, ParamVector, Result};

const SALT_INIT: u64 = 0x1417;
const SALT_BATCHES: u64 = 0xba7c;
const SALT_METRIC_SUBSET: u64 = 0x5b5e;
const SALT_SGLD: u64 = 0x561d;
const SALT_PROBES: u64 = 0x9e0b;

/// One row of a run's metric series. Epoch 0 describes the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean over the epoch's steps of the update-vector norm; 0 at epoch 0.
    pub update_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wbic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_trace: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian_se: Option<f64>,
    /// Mean Fisher smoothing over the epoch's steps; NGD only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub params: ParamVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub architecture: MlpArchitecture,
    pub records: Vec<MetricsRecord>,
    /// Parameters at every epoch where a metric fired, and at the end.
    pub checkpoints: Vec<Checkpoint>,
    pub final_params: ParamVector,
}

impl RunOutput {
    pub fn final_record(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }
}

/// Epoch-by-epoch training state. Cloning a trainer forks the run: the
/// clone has the same parameters and the same mini-batch schedule.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    cfg: RunConfig,
    data: &'a PreparedData,
    model: MlpModel,
    epoch: usize,
    final_epoch: usize,
    train_full: Batch,
    val_full: Batch,
    metric_batch: Batch,
    records: Vec<MetricsRecord>,
    checkpoints: Vec<Checkpoint>,
}

impl<'a> Trainer<'a> {
    /// Initialises the model and records epoch 0.
    pub fn new(cfg: &RunConfig, data: &'a PreparedData) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg
            .architecture
            .resolve(data.train.input_dim(), data.train.num_classes().max(data.val.num_classes()))?;
        let model = MlpModel::init(arch, &mut rng::seeded(rng::derive_seed(cfg.seed, SALT_INIT)))?;
        Self::from_model(cfg, data, model)
    }

    /// Starts from given parameters instead of a fresh initialisation.
    pub fn from_model(cfg: &RunConfig, data: &'a PreparedData, model: MlpModel) -> Result<Self> {
        cfg.validate()?;
        if model.architecture().input_dim != data.train.input_dim() {
            return Err(Error::config(format!(
                "model expects {} inputs, data has {}",
                model.architecture().input_dim,
                data.train.input_dim()
            )));
        }
        let train_full = data.train.to_batch()?;
        let val_full = data.val.to_batch()?;
        let k = cfg.metrics.metric_batch_size.min(data.train.len());
        let order = rng::permutation(
            data.train.len(),
            &mut rng::seeded(rng::derive_seed(cfg.seed, SALT_METRIC_SUBSET)),
        );
        let metric_batch = data.train.gather(&order[..k])?;
        let mut t = Trainer {
            cfg: cfg.clone(),
            data,
            model,
            epoch: 0,
            final_epoch: cfg.epochs,
            train_full,
            val_full,
            metric_batch,
            records: Vec::new(),
            checkpoints: Vec::new(),
        };
        let rec = t.measure(0.0, None)?;
        t.push(rec);
        Ok(t)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    /// Switches the optimizer for the following epochs.
    pub fn set_optimizer(&mut self, optimizer: OptimizerConfig) -> Result<()> {
        optimizer.validate()?;
        self.cfg.optimizer = optimizer;
        Ok(())
    }

    /// Epoch at which metrics fire regardless of cadence.
    pub fn set_final_epoch(&mut self, epoch: usize) {
        self.final_epoch = epoch;
    }

    /// Keeps only the most recent record, so a forked branch's series
    /// starts at the fork point.
    pub fn truncate_history(&mut self) {
        let keep = self.records.len().saturating_sub(1);
        self.records.drain(..keep);
        let keep = self.checkpoints.len().saturating_sub(1);
        self.checkpoints.drain(..keep);
    }

    /// Trains for one epoch over shuffled mini-batches and records metrics.
    pub fn run_epoch(&mut self) -> Result<&MetricsRecord> {
        let epoch = self.epoch + 1;
        let opt = self.cfg.optimizer.clone();
        let plan = batches(
            self.data.train.len(),
            opt.batch_size(),
            rng::derive_seed(self.cfg.seed, SALT_BATCHES),
            epoch,
        )?;
        let mut kappa_sum = 0.0;
        let mut norm_sum = 0.0;
        for idx in &plan {
            let batch = self.data.train.gather(idx)?;
            let step = opt.step(&self.model, &batch)?;
            kappa_sum += step.kappa;
            norm_sum += step.update_norm;
            self.model.set_params(step.new_params)?;
        }
        let update_norm = norm_sum / plan.len() as f64;
        let kappa_mean = matches!(opt, OptimizerConfig::Ngd(_)).then(|| kappa_sum / plan.len() as f64);
        self.epoch = epoch;
        let rec = self.measure(update_norm, kappa_mean)?;
        self.push(rec);
        Ok(self.records.last().expect("record just pushed"))
    }

    fn push(&mut self, rec: MetricsRecord) {
        let m = &self.cfg.metrics;
        let any = [m.llc_every, m.wbic_every, m.trace_every]
            .into_iter()
            .any(|c| MetricsConfig::fires(c, rec.epoch, self.final_epoch));
        if any || rec.epoch == self.final_epoch {
            self.checkpoints.push(Checkpoint {
                epoch: rec.epoch,
                params: self.model.params().clone(),
            });
        }
        self.records.push(rec);
    }

    fn sgld_config(&self) -> SgldConfig {
        let base = &self.cfg.metrics.sgld;
        SgldConfig {
            seed: rng::derive_seed(rng::derive_seed(base.seed, self.cfg.seed ^ SALT_SGLD), self.epoch as u64),
            ..base.clone()
        }
    }

    fn hutchinson_config(&self) -> HutchinsonConfig {
        let base = &self.cfg.metrics.hutchinson;
        HutchinsonConfig {
            seed: rng::derive_seed(rng::derive_seed(base.seed, self.cfg.seed ^ SALT_PROBES), self.epoch as u64),
            ..base.clone()
        }
    }

    fn measure(&self, update_norm: f64, kappa_mean: Option<f64>) -> Result<MetricsRecord> {
        let m = &self.cfg.metrics;
        let e = self.epoch;
        let train_loss = self.model.nll_loss(&self.train_full)?;
        let val_loss = self.model.nll_loss(&self.val_full)?;
        let mut rec = MetricsRecord {
            epoch: e,
            train_loss,
            val_loss,
            update_norm,
            lambda_hat: None,
            lambda_se: None,
            wbic: None,
            hessian_trace: None,
            hessian_se: None,
            kappa_mean,
        };
        let want_llc = MetricsConfig::fires(m.llc_every, e, self.final_epoch);
        let want_wbic = MetricsConfig::fires(m.wbic_every, e, self.final_epoch);
        if want_llc || want_wbic {
            let est = estimate_llc(&self.model, &self.data.train, &self.sgld_config())?;
            if want_llc {
                rec.lambda_hat = Some(est.lambda_hat);
                rec.lambda_se = Some(est.std_error);
            }
            if want_wbic {
                rec.wbic = Some(est.wbic);
            }
        }
        if MetricsConfig::fires(m.trace_every, e, self.final_epoch) {
            let tr = hutchinson_trace(&self.model, &self.metric_batch, &self.hutchinson_config())?;
            rec.hessian_trace = Some(tr.mean);
            rec.hessian_se = Some(tr.standard_error);
        }
        Ok(rec)
    }

    pub fn output(&self) -> RunOutput {
        RunOutput {
            architecture: self.model.architecture().clone(),
            records: self.records.clone(),
            checkpoints: self.checkpoints.clone(),
            final_params: self.model.params().clone(),
        }
    }

    /// Runs epochs until `final_epoch`. A failure returns
    /// [`Error::RunAborted`] carrying everything recorded so far.
    pub fn run_to_end(&mut self) -> Result<RunOutput> {
        while self.epoch < self.final_epoch {
            if let Err(e) = self.run_epoch() {
                return Err(Error::RunAborted {
                    epoch: self.epoch + 1,
                    source: Box::new(e),
                    partial: Box::new(self.output()),
                });
            }
        }
        Ok(self.output())
    }
}

/// Trains the configured model for `cfg.epochs` epochs.
pub fn run_training(cfg: &RunConfig, data: &PreparedData) -> Result<RunOutput> {
    Trainer::new(cfg, data)?.run_to_end()
}
