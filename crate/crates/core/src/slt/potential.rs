use std::fmt;

use super::StochasticLoss;
use crate::{Error, ParamVector, Result};

/// A closed-form non-negative potential `K(w)` on a box `[-h, h]^d`, with
/// `K(0) = 0`.
#[derive(Clone)]
pub struct AnalyticPotential {
    pub dimension: usize,
    pub description: String,
    /// Half-width `h` of the sampling box.
    pub half_width: f64,
    pub value: fn(&[f64]) -> f64,
    pub gradient: fn(&[f64]) -> Vec<f64>,
}

impl fmt::Debug for AnalyticPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticPotential")
            .field("dimension", &self.dimension)
            .field("description", &self.description)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl AnalyticPotential {
    /// `K = w^2`
    pub fn quadratic_1d(half_width: f64) -> Self {
        AnalyticPotential {
            dimension: 1,
            description: "w^2".into(),
            half_width,
            value: |w| w[0] * w[0],
            gradient: |w| vec![2.0 * w[0]],
        }
    }

    /// `K = w1^2 + w2^2`
    pub fn quadratic_2d(half_width: f64) -> Self {
        AnalyticPotential {
            dimension: 2,
            description: "w1^2 + w2^2".into(),
            half_width,
            value: |w| w[0] * w[0] + w[1] * w[1],
            gradient: |w| vec![2.0 * w[0], 2.0 * w[1]],
        }
    }

    /// `K = w1^2 w2^2`, degenerate along both axes.
    pub fn degenerate_2d(half_width: f64) -> Self {
        AnalyticPotential {
            dimension: 2,
            description: "w1^2 w2^2".into(),
            half_width,
            value: |w| w[0] * w[0] * w[1] * w[1],
            gradient: |w| vec![2.0 * w[0] * w[1] * w[1], 2.0 * w[1] * w[0] * w[0]],
        }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        (self.value)(w)
    }
}

/// Uses a potential as a deterministic stand-in for `L_n` with a nominal
/// sample size `n` (mini-batches all see the same loss).
#[derive(Debug, Clone)]
pub struct PotentialLoss {
    pub potential: AnalyticPotential,
    pub n: usize,
}

impl PotentialLoss {
    fn check(&self, w: &ParamVector) -> Result<()> {
        if w.len() != self.potential.dimension {
            return Err(Error::config(format!(
                "potential has dimension {}, got a vector of length {}",
                self.potential.dimension,
                w.len()
            )));
        }
        Ok(())
    }
}

impl StochasticLoss for PotentialLoss {
    fn dim(&self) -> usize {
        self.potential.dimension
    }

    fn n(&self) -> usize {
        self.n
    }

    fn full_loss(&self, w: &ParamVector) -> Result<f64> {
        self.check(w)?;
        Ok(self.potential.eval(w.as_slice()))
    }

    fn batch_loss_grad(&self, w: &ParamVector, _indices: &[usize]) -> Result<(f64, ParamVector)> {
        self.check(w)?;
        Ok((
            self.potential.eval(w.as_slice()),
            ParamVector::from_vec((self.potential.gradient)(w.as_slice())),
        ))
    }
}
