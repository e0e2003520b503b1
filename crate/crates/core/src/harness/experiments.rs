use serde::{Deserialize, Serialize};

use super::config::{ArchitectureSpec, PreparedData, RunConfig};
use super::stats::{linear_fit, spearman, welch_greater, LinearFit, WelchTest};
use super::training::{run_training, MetricsRecord, Trainer};
use crate::optim::{NgdConfig, OptimizerConfig, SgdConfig};
use crate::{Error, Result};

/// SGD against NGD over seeds, optionally for several architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub base: RunConfig,
    pub sgd: SgdConfig,
    pub ngd: NgdConfig,
    pub seeds: Vec<u64>,
    /// Empty means the base architecture only.
    #[serde(default)]
    pub architectures: Vec<ArchitectureSpec>,
}

impl ArchitectureSpec {
    /// One and two hidden layers of 64, 128 and 256 units.
    pub fn width_depth_grid() -> Vec<ArchitectureSpec> {
        let mut out = Vec::new();
        for depth in [1, 2] {
            for width in [64, 128, 256] {
                out.push(ArchitectureSpec {
                    hidden_layers: vec![width; depth],
                    activation: Default::default(),
                });
            }
        }
        out
    }

    pub fn label(&self) -> String {
        match self.hidden_layers.first() {
            None => "0x0".into(),
            Some(&w) if self.hidden_layers.iter().all(|&x| x == w) => format!("{}x{}", self.hidden_layers.len(), w),
            _ => self.hidden_layers.iter().map(usize::to_string).collect::<Vec<_>>().join("-"),
        }
    }
}

/// Metric series of one finished run within an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRun {
    pub label: String,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub architecture: String,
    pub seeds: Vec<u64>,
    pub sgd_lambda: Vec<f64>,
    pub ngd_lambda: Vec<f64>,
    pub sgd_trace: Vec<f64>,
    pub ngd_trace: Vec<f64>,
    /// NGD greater than SGD.
    pub lambda_test: WelchTest,
    pub trace_test: Option<WelchTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub runs: Vec<LabeledRun>,
}

fn final_metric(records: &[MetricsRecord], f: impl Fn(&MetricsRecord) -> Option<f64>) -> Result<f64> {
    records
        .last()
        .and_then(f)
        .ok_or_else(|| Error::config("final epoch is missing a metric the experiment needs"))
}

/// Per seed, trains once with SGD and once with NGD. Both runs share the
/// seed, hence the initialisation and the mini-batch order.
pub fn experiment_compare(spec: &CompareSpec, data: &PreparedData) -> Result<CompareReport> {
    if spec.seeds.len() < 2 {
        return Err(Error::Statistics(format!(
            "comparison needs at least 2 seeds, got {}",
            spec.seeds.len()
        )));
    }
    if spec.base.metrics.llc_every.is_none() {
        return Err(Error::config("comparison needs the llc metric enabled"));
    }
    let archs = if spec.architectures.is_empty() {
        vec![spec.base.architecture.clone()]
    } else {
        spec.architectures.clone()
    };
    let with_trace = spec.base.metrics.trace_every.is_some();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for arch in &archs {
        let label = arch.label();
        let mut row = CompareRow {
            architecture: label.clone(),
            seeds: spec.seeds.clone(),
            sgd_lambda: Vec::new(),
            ngd_lambda: Vec::new(),
            sgd_trace: Vec::new(),
            ngd_trace: Vec::new(),
            lambda_test: WelchTest {
                mean_a: 0.0,
                mean_b: 0.0,
                t: 0.0,
                df: 0.0,
                p_value: 1.0,
            },
            trace_test: None,
        };
        for &seed in &spec.seeds {
            for opt in [OptimizerConfig::Sgd(spec.sgd.clone()), OptimizerConfig::Ngd(spec.ngd.clone())] {
                let mut cfg = spec.base.with_seed(seed).with_optimizer(opt.clone());
                cfg.architecture = arch.clone();
                let out = run_training(&cfg, data)?;
                let lambda = final_metric(&out.records, |r| r.lambda_hat)?;
                let trace = if with_trace {
                    Some(final_metric(&out.records, |r| r.hessian_trace)?)
                } else {
                    None
                };
                let (l, t) = match opt {
                    OptimizerConfig::Sgd(_) => (&mut row.sgd_lambda, &mut row.sgd_trace),
                    OptimizerConfig::Ngd(_) => (&mut row.ngd_lambda, &mut row.ngd_trace),
                };
                l.push(lambda);
                t.extend(trace);
                runs.push(LabeledRun {
                    label: format!("{label}/{}", opt.name()),
                    seed,
                    records: out.records,
                });
            }
        }
        row.lambda_test = welch_greater(&row.ngd_lambda, &row.sgd_lambda)?;
        if with_trace {
            row.trace_test = Some(welch_greater(&row.ngd_trace, &row.sgd_trace)?);
        }
        rows.push(row);
    }
    Ok(CompareReport { rows, runs })
}

/// NGD grid varying one smoothing constant at a time; the other keeps its
/// value from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Also train SGD per seed for a reference band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd_baseline: Option<SgdConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// `"alpha"` or `"epsilon"`.
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub lambda_hat: f64,
    pub lambda_se: Option<f64>,
    pub hessian_trace: Option<f64>,
    pub kappa_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// `(seed, final lambda_hat)` for the SGD reference runs.
    pub sgd_baseline: Vec<(u64, f64)>,
}

impl SweepReport {
    pub fn points_for(&self, parameter: &str) -> impl Iterator<Item = &SweepPoint> {
        let parameter = parameter.to_string();
        self.points.iter().filter(move |p| p.parameter == parameter)
    }
}

pub fn experiment_smoothing_sweep(spec: &SweepSpec, data: &PreparedData) -> Result<SweepReport> {
    let OptimizerConfig::Ngd(ngd) = &spec.base.optimizer else {
        return Err(Error::config("smoothing sweep needs an NGD base optimizer"));
    };
    if spec.alphas.is_empty() && spec.epsilons.is_empty() {
        return Err(Error::config("smoothing sweep needs a non-empty alpha or epsilon grid"));
    }
    if spec.seeds.is_empty() {
        return Err(Error::config("smoothing sweep needs at least one seed"));
    }
    if spec.base.metrics.llc_every.is_none() {
        return Err(Error::config("smoothing sweep needs the llc metric enabled"));
    }
    let grid = spec
        .alphas
        .iter()
        .map(|&a| ("alpha", a, NgdConfig { alpha: a, ..ngd.clone() }))
        .chain(spec.epsilons.iter().map(|&e| {
            (
                "epsilon",
                e,
                NgdConfig {
                    epsilon_smooth: e,
                    ..ngd.clone()
                },
            )
        }));
    let mut points = Vec::new();
    for (parameter, value, cfg_ngd) in grid {
        for &seed in &spec.seeds {
            let cfg = spec.base.with_seed(seed).with_optimizer(OptimizerConfig::Ngd(cfg_ngd.clone()));
            let out = run_training(&cfg, data)?;
            let last = out.final_record().expect("runs always have an epoch-0 record");
            points.push(SweepPoint {
                parameter: parameter.into(),
                value,
                seed,
                lambda_hat: final_metric(&out.records, |r| r.lambda_hat)?,
                lambda_se: last.lambda_se,
                hessian_trace: last.hessian_trace,
                kappa_mean: last.kappa_mean,
            });
        }
    }
    let mut sgd_baseline = Vec::new();
    if let Some(sgd) = &spec.sgd_baseline {
        for &seed in &spec.seeds {
            let cfg = spec.base.with_seed(seed).with_optimizer(OptimizerConfig::Sgd(sgd.clone()));
            let out = run_training(&cfg, data)?;
            sgd_baseline.push((seed, final_metric(&out.records, |r| r.lambda_hat)?));
        }
    }
    Ok(SweepReport { points, sgd_baseline })
}

/// When the pretraining run is split into two branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForkPoint {
    Epoch { epoch: usize },
    /// Fork once the last `window` learning-coefficient measurements span
    /// less than `threshold` relative to the latest one.
    Stabilized {
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_window")]
        window: usize,
    },
}

fn default_threshold() -> f64 {
    0.05
}

fn default_window() -> usize {
    5
}

impl Default for ForkPoint {
    fn default() -> Self {
        ForkPoint::Stabilized {
            threshold: default_threshold(),
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkSpec {
    /// SGD pretraining; `epochs` is the budget for the fork rule.
    pub pretrain: RunConfig,
    #[serde(default)]
    pub fork: ForkPoint,
    pub branch_a: OptimizerConfig,
    pub branch_b: OptimizerConfig,
    pub post_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkReport {
    pub fork_epoch: usize,
    pub pretrain: Vec<MetricsRecord>,
    /// Branch series start with the shared record at the fork epoch.
    pub branch_a: Vec<MetricsRecord>,
    pub branch_b: Vec<MetricsRecord>,
    /// Least-squares slope of the learning coefficient against epoch.
    pub slope_a: Option<LinearFit>,
    pub slope_b: Option<LinearFit>,
}

fn stabilized(records: &[MetricsRecord], threshold: f64, window: usize) -> bool {
    let lambdas: Vec<f64> = records.iter().filter_map(|r| r.lambda_hat).collect();
    if lambdas.len() < window {
        return false;
    }
    let tail = &lambdas[lambdas.len() - window..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reference = tail[window - 1].abs();
    reference > 0.0 && (hi - lo) / reference < threshold
}

/// Least-squares trend of a per-epoch metric over the epochs it was
/// measured; `None` with fewer than three measurements.
pub fn metric_slope(records: &[MetricsRecord], f: impl Fn(&MetricsRecord) -> Option<f64>) -> Option<LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = records.iter().filter_map(|r| f(r).map(|v| (r.epoch as f64, v))).unzip();
    linear_fit(&x, &y).ok()
}

pub fn experiment_fork(spec: &ForkSpec, data: &PreparedData) -> Result<ForkReport> {
    if !matches!(spec.pretrain.optimizer, OptimizerConfig::Sgd(_)) {
        return Err(Error::config("fork pretraining must use SGD"));
    }
    spec.branch_a.validate()?;
    spec.branch_b.validate()?;
    let mut pre_cfg = spec.pretrain.clone();
    let mut trainer = match spec.fork {
        ForkPoint::Epoch { epoch } => {
            if epoch > spec.pretrain.epochs {
                return Err(Error::config(format!(
                    "fork epoch {epoch} exceeds the pretraining budget of {} epochs",
                    spec.pretrain.epochs
                )));
            }
            pre_cfg.epochs = epoch;
            let mut t = Trainer::new(&pre_cfg, data)?;
            t.run_to_end()?;
            t
        }
        ForkPoint::Stabilized { threshold, window } => {
            if pre_cfg.metrics.llc_every.is_none() {
                return Err(Error::config("stabilization rule needs the llc metric enabled"));
            }
            if window < 2 || !(threshold > 0.0) {
                return Err(Error::config("stabilization rule needs window >= 2 and threshold > 0"));
            }
            let mut t = Trainer::new(&pre_cfg, data)?;
            loop {
                if stabilized(t.records(), threshold, window) {
                    break t;
                }
                if t.epoch() >= pre_cfg.epochs {
                    return Err(Error::config(format!(
                        "learning coefficient did not stabilize within {} pretraining epochs",
                        pre_cfg.epochs
                    )));
                }
                t.run_epoch()?;
            }
        }
    };
    let fork_epoch = trainer.epoch();
    let pretrain = trainer.records().to_vec();
    trainer.truncate_history();
    trainer.set_final_epoch(fork_epoch + spec.post_epochs);

    let mut branches = Vec::with_capacity(2);
    for opt in [&spec.branch_a, &spec.branch_b] {
        let mut b = trainer.clone();
        b.set_optimizer(opt.clone())?;
        branches.push(b.run_to_end()?.records);
    }
    let branch_b = branches.pop().expect("two branches");
    let branch_a = branches.pop().expect("two branches");
    Ok(ForkReport {
        fork_epoch,
        pretrain,
        slope_a: metric_slope(&branch_a, |r| r.lambda_hat),
        slope_b: metric_slope(&branch_b, |r| r.lambda_hat),
        branch_a,
        branch_b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitReport {
    pub records: Vec<MetricsRecord>,
    /// Epoch of the lowest validation loss (first one on ties).
    pub val_min_epoch: usize,
    /// Final validation loss exceeds the minimum.
    pub overfit_onset: bool,
    /// Rank correlations over records from `val_min_epoch` on; absent when
    /// fewer than three measurements exist or a series is constant.
    pub wbic_val_spearman: Option<f64>,
    pub lambda_epoch_spearman: Option<f64>,
    pub trace_epoch_spearman: Option<f64>,
}

fn post_onset_spearman(
    records: &[MetricsRecord],
    x: impl Fn(&MetricsRecord) -> Option<f64>,
    y: impl Fn(&MetricsRecord) -> Option<f64>,
) -> Option<f64> {
    let (a, b): (Vec<f64>, Vec<f64>) = records.iter().filter_map(|r| Some((x(r)?, y(r)?))).unzip();
    spearman(&a, &b).ok()
}

pub fn experiment_overfit(cfg: &RunConfig, data: &PreparedData) -> Result<OverfitReport> {
    let records = run_training(cfg, data)?.records;
    let (val_min_epoch, min_val) = records
        .iter()
        .map(|r| (r.epoch, r.val_loss))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    let last_val = records.last().map_or(min_val, |r| r.val_loss);
    let post: Vec<MetricsRecord> = records.iter().filter(|r| r.epoch >= val_min_epoch).cloned().collect();
    let epoch = |r: &MetricsRecord| Some(r.epoch as f64);
    Ok(OverfitReport {
        val_min_epoch,
        overfit_onset: last_val > min_val,
        wbic_val_spearman: post_onset_spearman(&post, |r| r.wbic, |r| Some(r.val_loss)),
        lambda_epoch_spearman: post_onset_spearman(&post, |r| r.lambda_hat, epoch),
        trace_epoch_spearman: post_onset_spearman(&post, |r| r.hessian_trace, epoch),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, lambda: Option<f64>) -> MetricsRecord {
        MetricsRecord {
            epoch,
            train_loss: 1.0,
            val_loss: 1.0,
            update_norm: 0.0,
            lambda_hat: lambda,
            lambda_se: None,
            wbic: None,
            hessian_trace: None,
            hessian_se: None,
            kappa_mean: None,
        }
    }

    #[test]
    fn stabilization_needs_full_window() {
        let mut rs: Vec<_> = (0..4).map(|e| rec(e, Some(10.0))).collect();
        assert!(!stabilized(&rs, 0.05, 5));
        rs.push(rec(4, Some(10.2)));
        assert!(stabilized(&rs, 0.05, 5));
        rs.push(rec(5, Some(12.0)));
        assert!(!stabilized(&rs, 0.05, 5));
    }

    #[test]
    fn architecture_labels() {
        let grid = ArchitectureSpec::width_depth_grid();
        let labels: Vec<_> = grid.iter().map(ArchitectureSpec::label).collect();
        assert_eq!(labels, ["1x64", "1x128", "1x256", "2x64", "2x128", "2x256"]);
    }
}
