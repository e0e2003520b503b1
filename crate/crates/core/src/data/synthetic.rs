use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::{rng, Error, Result};

/// Gaussian blobs around hypercube vertices, clamped to `[0, 1]`.
///
/// Class `k` is centred on the vertex whose coordinates are the binary digits
/// of `k`, mapped to `0.25` / `0.75`. Labels cycle through the classes so the
/// set is balanced.
pub fn synthetic_classification(n: usize, input_dim: usize, classes: usize, seed: u64) -> Result<Dataset> {
    synthetic_classification_with_spread(n, input_dim, classes, seed, 0.1)
}

pub fn synthetic_classification_with_spread(
    n: usize,
    input_dim: usize,
    classes: usize,
    seed: u64,
    spread: f64,
) -> Result<Dataset> {
    if input_dim == 0 {
        return Err(Error::config("input_dim must be at least 1"));
    }
    if classes < 2 {
        return Err(Error::config("need at least 2 classes"));
    }
    if input_dim < usize::BITS as usize && classes > 1usize << input_dim {
        return Err(Error::config(format!(
            "{classes} classes do not fit on the vertices of a {input_dim}-cube"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::config("spread must be non-negative"));
    }
    let mut r = rng::seeded(seed);
    let mut inputs = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % classes;
        for bit in 0..input_dim {
            let on = bit < usize::BITS as usize && (k >> bit) & 1 == 1;
            let centre = if on { 0.75 } else { 0.25 };
            let noise: f64 = r.sample(StandardNormal);
            inputs.push((centre + spread * noise).clamp(0.0, 1.0));
        }
        labels.push(k);
    }
    Dataset::new(
        format!("synthetic-{classes}x{input_dim}"),
        inputs,
        labels,
        input_dim,
        classes,
        None,
    )
}
