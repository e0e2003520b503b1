use super::model::{outer_accumulate, Tape};
use super::{Batch, MlpModel};
use crate::error::ensure_finite;
use crate::params::dot;
use crate::{Error, ParamVector, Result};

/// The empirical Fisher `F = (1/m) sum_i g_i g_i^T` of one batch, held
/// implicitly through the forward tape and the per-example error signals.
///
/// Applying it costs two passes over the parameters per example; the `d x d`
/// matrix is never formed.
pub struct FisherOperator<'a> {
    model: &'a MlpModel,
    batch: &'a Batch,
    tape: Tape,
    deltas: Vec<Vec<f64>>,
}

impl<'a> FisherOperator<'a> {
    pub fn new(model: &'a MlpModel, batch: &'a Batch) -> Result<Self> {
        let tape = model.tape(batch)?;
        let deltas = model.example_deltas(&tape, batch);
        Ok(FisherOperator {
            model,
            batch,
            tape,
            deltas,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.param_count()
    }

    pub fn batch_len(&self) -> usize {
        self.batch.len()
    }

    /// Mean loss over the batch.
    pub fn loss(&self) -> f64 {
        super::model::nll_from_tape(&self.tape, self.batch, self.model.architecture().output_classes)
    }

    /// Gradient of the mean loss (the mean of the per-example gradients).
    pub fn gradient(&self) -> ParamVector {
        self.model.accumulate(&self.tape, self.batch, &self.deltas, None)
    }

    /// `g_i . v` for every example.
    pub fn example_dots(&self, v: &ParamVector) -> Vec<f64> {
        let layers = self.model.architecture().layers();
        let m = self.batch.len();
        let vs = v.as_slice();
        let mut s = vec![0.0; m];
        for (l, layer) in layers.iter().enumerate() {
            let (k, n) = (layer.fan_in, layer.fan_out);
            let vw = &vs[layer.weight_range()];
            let vb = &vs[layer.bias_range()];
            let input = self.tape.layer_input(self.batch, l);
            let delta = &self.deltas[l];
            for (i, si) in s.iter_mut().enumerate() {
                let x = &input[i * k..(i + 1) * k];
                let d = &delta[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for j in 0..n {
                    if d[j] != 0.0 {
                        acc += d[j] * (dot(x, &vw[j * k..(j + 1) * k]) + vb[j]);
                    }
                }
                *si += acc;
            }
        }
        s
    }

    /// `F v = (1/m) sum_i (g_i . v) g_i`.
    pub fn apply(&self, v: &ParamVector) -> Result<ParamVector> {
        if v.len() != self.dim() {
            return Err(Error::config(format!(
                "tangent vector has length {}, model has {} parameters",
                v.len(),
                self.dim()
            )));
        }
        let s = self.example_dots(v);
        let out = self.model.accumulate(&self.tape, self.batch, &self.deltas, Some(&s));
        ensure_finite(out.as_slice(), "Fisher-vector product")?;
        Ok(out)
    }

    /// `(1/m) sum_i |g_i|^2`, using `|delta (x) x|^2 = |delta|^2 |x|^2` per
    /// layer (the bias column contributes `|delta|^2`).
    pub fn trace(&self) -> f64 {
        let layers = self.model.architecture().layers();
        let m = self.batch.len();
        let mut total = 0.0;
        for (l, layer) in layers.iter().enumerate() {
            let (k, n) = (layer.fan_in, layer.fan_out);
            let input = self.tape.layer_input(self.batch, l);
            let delta = &self.deltas[l];
            for i in 0..m {
                let x = &input[i * k..(i + 1) * k];
                let d = &delta[i * n..(i + 1) * n];
                total += dot(d, d) * (dot(x, x) + 1.0);
            }
        }
        total / m as f64
    }

    /// Gradient of example `i`'s own loss.
    pub fn example_grad(&self, i: usize) -> ParamVector {
        let m = self.batch.len();
        let mut weights = vec![0.0; m];
        weights[i] = m as f64;
        let layers = self.model.architecture().layers();
        let mut g = ParamVector::zeros(self.dim());
        for (l, layer) in layers.iter().enumerate() {
            let input = self.tape.layer_input(self.batch, l);
            outer_accumulate(&self.deltas[l], input, m, layer, Some(&weights), g.as_mut_slice());
        }
        g.scale(1.0 / m as f64);
        g
    }
}
