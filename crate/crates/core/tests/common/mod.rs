#![allow(dead_code)]

use degen::data::{synthetic_classification, Dataset};
use degen::nn::{Activation, Batch, MlpArchitecture, MlpModel};
use degen::rng;

/// Mean NLL computed with plain loops, independent of the library's
/// forward pass. Same parameter layout: per layer, row-major weights
/// `[out][in]` followed by biases.
pub fn naive_loss(arch: &MlpArchitecture, params: &[f64], inputs: &[f64], labels: &[usize]) -> f64 {
    naive_forward(arch, params, inputs, labels, None).0
}

/// Relu on/off pattern of every hidden unit for every example.
pub fn relu_pattern(arch: &MlpArchitecture, params: &[f64], inputs: &[f64], labels: &[usize]) -> Vec<bool> {
    naive_forward(arch, params, inputs, labels, None).1
}

/// As [`naive_loss`], but with relu gates fixed to `pattern` instead of
/// recomputed. Near a point with no pre-activation exactly at zero this is
/// the same function, so its derivatives there are the network's, while
/// finite-difference stencils no longer straddle kinks.
pub fn naive_loss_gated(arch: &MlpArchitecture, params: &[f64], inputs: &[f64], labels: &[usize], pattern: &[bool]) -> f64 {
    naive_forward(arch, params, inputs, labels, Some(pattern)).0
}

fn naive_forward(
    arch: &MlpArchitecture,
    params: &[f64],
    inputs: &[f64],
    labels: &[usize],
    gates: Option<&[bool]>,
) -> (f64, Vec<bool>) {
    let mut widths = vec![arch.input_dim];
    widths.extend(&arch.hidden_layers);
    widths.push(arch.output_classes);
    let m = labels.len();
    let mut total = 0.0;
    let mut pattern = Vec::new();
    for i in 0..m {
        let mut h: Vec<f64> = inputs[i * arch.input_dim..(i + 1) * arch.input_dim].to_vec();
        let mut off = 0;
        for l in 0..widths.len() - 1 {
            let (fi, fo) = (widths[l], widths[l + 1]);
            let w = &params[off..off + fi * fo];
            let b = &params[off + fi * fo..off + fi * fo + fo];
            off += fi * fo + fo;
            let mut z = vec![0.0; fo];
            for o in 0..fo {
                let mut s = b[o];
                for k in 0..fi {
                    s += w[o * fi + k] * h[k];
                }
                z[o] = s;
            }
            if l == widths.len() - 2 {
                h = z;
                continue;
            }
            h = z
                .iter()
                .map(|&v| match arch.activation {
                    Activation::Relu => {
                        let on = match gates {
                            Some(g) => g[pattern.len()],
                            None => v > 0.0,
                        };
                        pattern.push(on);
                        if on {
                            v
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => v.tanh(),
                })
                .collect();
        }
        let mx = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + h.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        total += lse - h[labels[i]];
    }
    (total / m as f64, pattern)
}

/// Gradient of a scalar function by Richardson-extrapolated central
/// differences, `(4 D(h/2) - D(h)) / 3`, with truncation error `O(h^4)`.
pub fn richardson_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    let mut central = |j: usize, step: f64| {
        let orig = p[j];
        p[j] = orig + step;
        let up = f(&p);
        p[j] = orig - step;
        let down = f(&p);
        p[j] = orig;
        (up - down) / (2.0 * step)
    };
    (0..x.len())
        .map(|j| {
            let coarse = central(j, h);
            let fine = central(j, h / 2.0);
            (4.0 * fine - coarse) / 3.0
        })
        .collect()
}

/// Central finite-difference gradient of [`naive_loss`].
pub fn fd_gradient(arch: &MlpArchitecture, params: &[f64], batch: &Batch, h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|j| {
            let orig = p[j];
            p[j] = orig + h;
            let up = naive_loss(arch, &p, batch.inputs(), batch.labels());
            p[j] = orig - h;
            let down = naive_loss(arch, &p, batch.inputs(), batch.labels());
            p[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(a.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Synthetic 8x8 inputs with 10 classes, as a batch.
pub fn batch_8x8(m: usize, seed: u64) -> Batch {
    synthetic_classification(m, 64, 10, seed).unwrap().to_batch().unwrap()
}

pub fn model(input_dim: usize, hidden: Vec<usize>, classes: usize, act: Activation, seed: u64) -> MlpModel {
    let arch = MlpArchitecture::new(input_dim, hidden, classes, act).unwrap();
    MlpModel::init(arch, &mut rng::seeded(seed)).unwrap()
}

/// Biases are zero after initialisation; give them some spread so their
/// derivatives are exercised.
pub fn perturb(model: &MlpModel, scale: f64, seed: u64) -> MlpModel {
    use rand::Rng as _;
    let mut r = rng::seeded(seed);
    let p: Vec<f64> = model
        .params()
        .iter()
        .map(|&v| v + scale * (r.random::<f64>() - 0.5))
        .collect();
    model.with_params(p.into()).unwrap()
}

pub fn random_vector(d: usize, seed: u64) -> degen::ParamVector {
    use rand::Rng as _;
    let mut r = rng::seeded(seed);
    (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>().into()
}

/// Location of the bundled MNIST subset.
pub fn mnist_dir() -> std::path::PathBuf {
    match std::env::var_os(degen::harness::DATA_DIR_ENV) {
        Some(d) => std::path::PathBuf::from(d).join("mnist-5k"),
        None => std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k"),
    }
}

pub fn mnist() -> Dataset {
    let d = mnist_dir();
    degen::data::load_idx(d.join("train-images-idx3-ubyte"), d.join("train-labels-idx1-ubyte")).unwrap()
}
