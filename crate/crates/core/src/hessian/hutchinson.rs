use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{Batch, MlpModel};
use crate::{rng, Error, ParamVector, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeDistribution {
    /// Standard normal coordinates.
    #[default]
    Gaussian,
    /// Uniform `+-1` coordinates.
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HutchinsonConfig {
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub probe_distribution: ProbeDistribution,
}

fn default_num_samples() -> usize {
    10_000
}

impl Default for HutchinsonConfig {
    fn default() -> Self {
        HutchinsonConfig {
            num_samples: default_num_samples(),
            seed: 0,
            probe_distribution: ProbeDistribution::Gaussian,
        }
    }
}

impl HutchinsonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::config("Hutchinson num_samples must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub mean: f64,
    /// Sample standard deviation of the per-probe values over `sqrt(N)`;
    /// 0 when `N = 1`.
    pub standard_error: f64,
    pub num_samples: usize,
}

/// Draws probe `k`. Each probe has its own stream so probes can be
/// evaluated in any order.
fn probe(d: usize, seed: u64, k: usize, dist: ProbeDistribution) -> ParamVector {
    let mut r = rng::stream(seed, k as u64);
    let values = match dist {
        ProbeDistribution::Gaussian => (0..d).map(|_| r.sample(StandardNormal)).collect(),
        ProbeDistribution::Rademacher => (0..d)
            .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    };
    ParamVector::from_vec(values)
}

/// Hutchinson estimate for an arbitrary Hessian-vector product.
pub fn hutchinson_trace_with<F>(d: usize, cfg: &HutchinsonConfig, mut hvp: F) -> Result<TraceEstimate>
where
    F: FnMut(&ParamVector) -> Result<ParamVector>,
{
    cfg.validate()?;
    let n = cfg.num_samples;
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let v = probe(d, cfg.seed, k, cfg.probe_distribution);
        let hv = hvp(&v).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite {
                context: "Hutchinson probe".into(),
                index: k,
            },
            other => other,
        })?;
        let q = v.dot(&hv);
        if !q.is_finite() {
            return Err(Error::NonFinite {
                context: "Hutchinson probe".into(),
                index: k,
            });
        }
        values.push(q);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let standard_error = if n > 1 {
        let var = values.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(TraceEstimate {
        mean,
        standard_error,
        num_samples: n,
    })
}

/// `Tr(H)` of the mean batch loss, estimated as the average of `v^T H v`.
pub fn hutchinson_trace(model: &MlpModel, batch: &Batch, cfg: &HutchinsonConfig) -> Result<TraceEstimate> {
    hutchinson_trace_with(model.param_count(), cfg, |v| model.hvp(batch, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_hessian_has_trace_d() {
        // loss (1/2)|w|^2 has H = I
        let d = 37;
        let cfg = HutchinsonConfig {
            num_samples: 2000,
            seed: 11,
            probe_distribution: ProbeDistribution::Gaussian,
        };
        let est = hutchinson_trace_with(d, &cfg, |v| Ok(v.clone())).unwrap();
        assert!((est.mean - d as f64).abs() <= 3.0 * est.standard_error);
    }

    #[test]
    fn rademacher_is_exact_for_diagonal_hessians() {
        let d = 12;
        let diag: Vec<f64> = (0..d).map(|i| i as f64 + 0.5).collect();
        let exact: f64 = diag.iter().sum();
        let cfg = HutchinsonConfig {
            num_samples: 5,
            seed: 1,
            probe_distribution: ProbeDistribution::Rademacher,
        };
        let est = hutchinson_trace_with(d, &cfg, |v| {
            Ok(ParamVector::from_vec(v.iter().zip(&diag).map(|(a, b)| a * b).collect()))
        })
        .unwrap();
        assert!((est.mean - exact).abs() < 1e-12);
        assert!(est.standard_error < 1e-12);
    }

    #[test]
    fn same_seed_same_estimate() {
        let cfg = HutchinsonConfig {
            num_samples: 50,
            seed: 3,
            ..Default::default()
        };
        let f = |v: &ParamVector| Ok(v.scaled(2.0));
        let a = hutchinson_trace_with(9, &cfg, f).unwrap();
        let b = hutchinson_trace_with(9, &cfg, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_probe_reports_index() {
        let cfg = HutchinsonConfig {
            num_samples: 10,
            seed: 0,
            ..Default::default()
        };
        let mut calls = 0;
        let err = hutchinson_trace_with(3, &cfg, |v| {
            calls += 1;
            if calls == 4 {
                Ok(ParamVector::from_vec(vec![f64::NAN; 3]))
            } else {
                Ok(v.clone())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 3, .. }));
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = HutchinsonConfig {
            num_samples: 0,
            ..Default::default()
        };
        assert!(hutchinson_trace_with(2, &cfg, |v| Ok(v.clone())).is_err());
    }
}
