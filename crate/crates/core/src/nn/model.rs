use rand::Rng as _;

use super::{Batch, FisherOperator, LayerShape, MlpArchitecture};
use crate::error::ensure_finite;
use crate::params::{axpy, dot};
use crate::rng::Rng;
use crate::{Error, ParamVector, Result};

/// Row-major `m x classes` matrix of log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbs {
    classes: usize,
    data: Vec<f64>,
}

impl LogProbs {
    pub fn rows(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    }
}

/// An architecture together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    arch: MlpArchitecture,
    params: ParamVector,
}

/// Forward-pass intermediates for a batch.
pub(crate) struct Tape {
    /// Pre-activations per layer, `m x fan_out`. The last entry holds logits.
    pub(crate) pre: Vec<Vec<f64>>,
    /// Post-activations of the hidden layers.
    pub(crate) post: Vec<Vec<f64>>,
    /// Output probabilities, `m x classes`.
    pub(crate) probs: Vec<f64>,
    /// Output log-probabilities, `m x classes`.
    pub(crate) log_probs: Vec<f64>,
}

impl Tape {
    pub(crate) fn layer_input<'a>(&'a self, batch: &'a Batch, layer: usize) -> &'a [f64] {
        if layer == 0 {
            batch.inputs()
        } else {
            &self.post[layer - 1]
        }
    }
}

impl MlpModel {
    pub fn new(arch: MlpArchitecture, params: ParamVector) -> Result<Self> {
        arch.validate()?;
        let d = arch.param_count();
        if params.len() != d {
            return Err(Error::config(format!(
                "parameter vector has length {}, architecture needs {d}",
                params.len()
            )));
        }
        ensure_finite(params.as_slice(), "model parameters")?;
        Ok(MlpModel { arch, params })
    }

    pub fn zeros(arch: MlpArchitecture) -> Result<Self> {
        let d = arch.param_count();
        Self::new(arch, ParamVector::zeros(d))
    }

    /// Uniform initialization in `+-sqrt(6 / (fan_in + fan_out))` per layer,
    /// biases zero.
    pub fn init(arch: MlpArchitecture, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let mut params = ParamVector::zeros(arch.param_count());
        for layer in arch.layers() {
            let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut params.as_mut_slice()[layer.weight_range()] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Self::new(arch, params)
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn into_params(self) -> ParamVector {
        self.params
    }

    /// Replaces the parameters, keeping the architecture.
    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        Self::new(self.arch.clone(), params)
    }

    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::config(format!(
                "parameter vector has length {}, architecture needs {}",
                params.len(),
                self.params.len()
            )));
        }
        ensure_finite(params.as_slice(), "model parameters")?;
        self.params = params;
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.input_dim() != self.arch.input_dim {
            return Err(Error::config(format!(
                "batch input_dim {} does not match architecture input_dim {}",
                batch.input_dim(),
                self.arch.input_dim
            )));
        }
        if let Some(bad) = batch
            .labels()
            .iter()
            .find(|&&y| y >= self.arch.output_classes)
        {
            return Err(Error::config(format!(
                "label {bad} out of range for {} classes",
                self.arch.output_classes
            )));
        }
        Ok(())
    }

    fn check_tangent(&self, v: &ParamVector) -> Result<()> {
        if v.len() != self.params.len() {
            return Err(Error::config(format!(
                "tangent vector has length {}, model has {} parameters",
                v.len(),
                self.params.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn tape(&self, batch: &Batch) -> Result<Tape> {
        self.check_batch(batch)?;
        let layers = self.arch.layers();
        let m = batch.len();
        let act = self.arch.activation;
        let w = self.params.as_slice();

        let mut pre = Vec::with_capacity(layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(layers.len() - 1);
        for (l, layer) in layers.iter().enumerate() {
            let input = if l == 0 { batch.inputs() } else { &post[l - 1] };
            let z = affine(input, m, layer, w);
            if l + 1 < layers.len() {
                post.push(z.iter().map(|&v| act.apply(v)).collect());
            }
            pre.push(z);
        }

        let classes = self.arch.output_classes;
        let logits = pre.last().unwrap();
        let mut probs = vec![0.0; m * classes];
        let mut log_probs = vec![0.0; m * classes];
        for i in 0..m {
            let row = &logits[i * classes..(i + 1) * classes];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            for j in 0..classes {
                let lp = row[j] - lse;
                log_probs[i * classes + j] = lp;
                probs[i * classes + j] = lp.exp();
            }
        }
        ensure_finite(&log_probs, "log-probabilities")?;
        Ok(Tape {
            pre,
            post,
            probs,
            log_probs,
        })
    }

    /// Log-softmax outputs, one row per example.
    pub fn forward(&self, batch: &Batch) -> Result<LogProbs> {
        let tape = self.tape(batch)?;
        Ok(LogProbs {
            classes: self.arch.output_classes,
            data: tape.log_probs,
        })
    }

    /// Mean negative log-likelihood of the batch labels.
    pub fn nll_loss(&self, batch: &Batch) -> Result<f64> {
        let tape = self.tape(batch)?;
        Ok(nll_from_tape(&tape, batch, self.arch.output_classes))
    }

    pub fn accuracy(&self, batch: &Batch) -> Result<f64> {
        let lp = self.forward(batch)?;
        let hits = (0..batch.len())
            .filter(|&i| lp.argmax(i) == batch.labels()[i])
            .count();
        Ok(hits as f64 / batch.len() as f64)
    }

    /// Output-layer error signal `softmax - onehot` per example (not divided
    /// by `m`), back-propagated to every layer.
    pub(crate) fn example_deltas(&self, tape: &Tape, batch: &Batch) -> Vec<Vec<f64>> {
        let layers = self.arch.layers();
        let m = batch.len();
        let classes = self.arch.output_classes;
        let act = self.arch.activation;
        let w = self.params.as_slice();

        let mut out = tape.probs.clone();
        for (i, &y) in batch.labels().iter().enumerate() {
            out[i * classes + y] -= 1.0;
        }

        let mut deltas = vec![Vec::new(); layers.len()];
        deltas[layers.len() - 1] = out;
        for l in (1..layers.len()).rev() {
            let upstream = back_through_weights(&deltas[l], m, &layers[l], w);
            let z = &tape.pre[l - 1];
            deltas[l - 1] = upstream
                .iter()
                .zip(z)
                .map(|(&e, &zv)| e * act.derivative(zv))
                .collect();
        }
        deltas
    }

    /// `(1/m) sum_i weight_i * delta_i (x) input_i` for every layer, with an
    /// optional per-example weight.
    pub(crate) fn accumulate(
        &self,
        tape: &Tape,
        batch: &Batch,
        deltas: &[Vec<f64>],
        weights: Option<&[f64]>,
    ) -> ParamVector {
        let layers = self.arch.layers();
        let m = batch.len();
        let mut g = ParamVector::zeros(self.params.len());
        let out = g.as_mut_slice();
        for (l, layer) in layers.iter().enumerate() {
            let input = tape.layer_input(batch, l);
            outer_accumulate(
                &deltas[l],
                input,
                m,
                layer,
                weights,
                out,
            );
        }
        g.scale(1.0 / m as f64);
        g
    }

    /// Gradient of the mean loss by reverse-mode accumulation.
    pub fn grad(&self, batch: &Batch) -> Result<ParamVector> {
        Ok(self.loss_and_grad(batch)?.1)
    }

    pub fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, ParamVector)> {
        let tape = self.tape(batch)?;
        let deltas = self.example_deltas(&tape, batch);
        let g = self.accumulate(&tape, batch, &deltas, None);
        ensure_finite(g.as_slice(), "gradient")?;
        Ok((nll_from_tape(&tape, batch, self.arch.output_classes), g))
    }

    /// Gradient of each example's own loss `-log p(y_i | x_i, w)`.
    pub fn per_example_grads(&self, batch: &Batch) -> Result<Vec<ParamVector>> {
        let fisher = FisherOperator::new(self, batch)?;
        Ok((0..batch.len()).map(|i| fisher.example_grad(i)).collect())
    }

    /// Exact Hessian-vector product of the mean loss, computed as the
    /// directional derivative of the gradient along `v` (forward-over-reverse).
    pub fn hvp(&self, batch: &Batch, v: &ParamVector) -> Result<ParamVector> {
        self.check_tangent(v)?;
        let tape = self.tape(batch)?;
        let layers = self.arch.layers();
        let m = batch.len();
        let classes = self.arch.output_classes;
        let act = self.arch.activation;
        let w = self.params.as_slice();
        let vs = v.as_slice();
        let nl = layers.len();

        // Directional derivatives of pre-activations and hidden activations.
        let mut r_pre: Vec<Vec<f64>> = Vec::with_capacity(nl);
        let mut r_post: Vec<Vec<f64>> = Vec::with_capacity(nl - 1);
        for (l, layer) in layers.iter().enumerate() {
            let input = tape.layer_input(batch, l);
            // dZ = input * V^T + c
            let mut rz = affine(input, m, layer, vs);
            if l > 0 {
                // + R(input) * W^T
                let r_in = &r_post[l - 1];
                let lin = linear(r_in, m, layer, w);
                axpy(1.0, &lin, &mut rz);
            }
            if l + 1 < nl {
                let z = &tape.pre[l];
                r_post.push(
                    rz.iter()
                        .zip(z)
                        .map(|(&r, &zv)| r * act.derivative(zv))
                        .collect(),
                );
            }
            r_pre.push(rz);
        }

        let deltas = self.example_deltas(&tape, batch);

        // R(delta) at the output: softmax Jacobian applied to R(logits).
        let mut r_deltas = vec![Vec::new(); nl];
        {
            let rz = &r_pre[nl - 1];
            let mut rd = vec![0.0; m * classes];
            for i in 0..m {
                let p = &tape.probs[i * classes..(i + 1) * classes];
                let r = &rz[i * classes..(i + 1) * classes];
                let pr = dot(p, r);
                for j in 0..classes {
                    rd[i * classes + j] = p[j] * (r[j] - pr);
                }
            }
            r_deltas[nl - 1] = rd;
        }
        for l in (1..nl).rev() {
            let layer = &layers[l];
            let upstream = back_through_weights(&deltas[l], m, layer, w);
            let mut r_upstream = back_through_weights(&deltas[l], m, layer, vs);
            let via_w = back_through_weights(&r_deltas[l], m, layer, w);
            axpy(1.0, &via_w, &mut r_upstream);
            let z = &tape.pre[l - 1];
            let rz = &r_pre[l - 1];
            r_deltas[l - 1] = (0..z.len())
                .map(|k| {
                    act.second_derivative(z[k]) * rz[k] * upstream[k]
                        + act.derivative(z[k]) * r_upstream[k]
                })
                .collect();
        }

        let mut hv = ParamVector::zeros(self.params.len());
        {
            let out = hv.as_mut_slice();
            for (l, layer) in layers.iter().enumerate() {
                let input = tape.layer_input(batch, l);
                outer_accumulate(&r_deltas[l], input, m, layer, None, out);
                if l > 0 {
                    // delta_l (x) R(input); biases get nothing from this term.
                    outer_accumulate_weights_only(&deltas[l], &r_post[l - 1], m, layer, out);
                }
            }
        }
        hv.scale(1.0 / m as f64);
        ensure_finite(hv.as_slice(), "Hessian-vector product")?;
        Ok(hv)
    }

    /// Empirical Fisher `(1/m) sum_i g_i g_i^T` applied to `v`, without
    /// forming the matrix.
    pub fn fisher_vector_product(&self, batch: &Batch, v: &ParamVector) -> Result<ParamVector> {
        self.check_tangent(v)?;
        FisherOperator::new(self, batch)?.apply(v)
    }

    /// `(1/m) sum_i |g_i|^2`, the trace of the empirical Fisher.
    pub fn fisher_trace(&self, batch: &Batch) -> Result<f64> {
        Ok(FisherOperator::new(self, batch)?.trace())
    }
}

pub(crate) fn nll_from_tape(tape: &Tape, batch: &Batch, classes: usize) -> f64 {
    let sum: f64 = batch
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| -tape.log_probs[i * classes + y])
        .sum();
    sum / batch.len() as f64
}

/// `input * W^T + b` for one layer, reading `W`, `b` from `params`.
fn affine(input: &[f64], m: usize, layer: &LayerShape, params: &[f64]) -> Vec<f64> {
    let bias = &params[layer.bias_range()];
    let mut z = linear(input, m, layer, params);
    for i in 0..m {
        axpy(1.0, bias, &mut z[i * layer.fan_out..(i + 1) * layer.fan_out]);
    }
    z
}

/// `input * W^T` for one layer.
fn linear(input: &[f64], m: usize, layer: &LayerShape, params: &[f64]) -> Vec<f64> {
    let (k, n) = (layer.fan_in, layer.fan_out);
    let weights = &params[layer.weight_range()];
    let mut z = vec![0.0; m * n];
    for i in 0..m {
        let x = &input[i * k..(i + 1) * k];
        let row = &mut z[i * n..(i + 1) * n];
        for (j, out) in row.iter_mut().enumerate() {
            *out = dot(x, &weights[j * k..(j + 1) * k]);
        }
    }
    z
}

/// `delta * W`: pushes an `m x fan_out` signal back to `m x fan_in`.
pub(crate) fn back_through_weights(
    delta: &[f64],
    m: usize,
    layer: &LayerShape,
    params: &[f64],
) -> Vec<f64> {
    let (k, n) = (layer.fan_in, layer.fan_out);
    let weights = &params[layer.weight_range()];
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let row = &mut out[i * k..(i + 1) * k];
        for j in 0..n {
            let d = delta[i * n + j];
            if d != 0.0 {
                axpy(d, &weights[j * k..(j + 1) * k], row);
            }
        }
    }
    out
}

/// `out[W] += sum_i w_i delta_i input_i^T`, `out[b] += sum_i w_i delta_i`.
pub(crate) fn outer_accumulate(
    delta: &[f64],
    input: &[f64],
    m: usize,
    layer: &LayerShape,
    weights: Option<&[f64]>,
    out: &mut [f64],
) {
    let (k, n) = (layer.fan_in, layer.fan_out);
    let (wblock, bblock) = out[layer.weight_offset..layer.bias_offset + n].split_at_mut(n * k);
    for i in 0..m {
        let scale = weights.map_or(1.0, |w| w[i]);
        if scale == 0.0 {
            continue;
        }
        let x = &input[i * k..(i + 1) * k];
        for j in 0..n {
            let d = scale * delta[i * n + j];
            if d != 0.0 {
                axpy(d, x, &mut wblock[j * k..(j + 1) * k]);
                bblock[j] += d;
            }
        }
    }
}

fn outer_accumulate_weights_only(
    delta: &[f64],
    input: &[f64],
    m: usize,
    layer: &LayerShape,
    out: &mut [f64],
) {
    let (k, n) = (layer.fan_in, layer.fan_out);
    let wblock = &mut out[layer.weight_range()];
    for i in 0..m {
        let x = &input[i * k..(i + 1) * k];
        for j in 0..n {
            let d = delta[i * n + j];
            if d != 0.0 {
                axpy(d, x, &mut wblock[j * k..(j + 1) * k]);
            }
        }
    }
}
