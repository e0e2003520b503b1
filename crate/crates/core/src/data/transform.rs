use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{rng, Error, Result};

fn square_side(dataset: &Dataset) -> Result<usize> {
    match dataset.image_shape() {
        Some((r, c)) if r == c => Ok(r),
        Some((r, c)) => Err(Error::config(format!("images are {r}x{c}, expected square"))),
        None => Err(Error::config("dataset has no image shape")),
    }
}

fn map_images(dataset: &Dataset, side: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Dataset> {
    let inputs = (0..dataset.len()).flat_map(|i| f(dataset.input(i))).collect();
    Dataset::new(
        dataset.name(),
        inputs,
        dataset.labels().to_vec(),
        side * side,
        dataset.num_classes(),
        Some((side, side)),
    )
}

/// Mean-pools square images down to `side x side`; `side` must divide the
/// current side length.
pub fn downsample(dataset: &Dataset, side: usize) -> Result<Dataset> {
    let from = square_side(dataset)?;
    if side == 0 || from % side != 0 {
        return Err(Error::config(format!(
            "downsample side {side} does not divide image side {from}"
        )));
    }
    let k = from / side;
    let norm = (k * k) as f64;
    map_images(dataset, side, |img| {
        let mut out = vec![0.0; side * side];
        for r in 0..from {
            for c in 0..from {
                out[(r / k) * side + c / k] += img[r * from + c];
            }
        }
        out.iter_mut().for_each(|v| *v /= norm);
        out
    })
}

/// Keeps the central `side x side` window of each image.
pub fn center_crop(dataset: &Dataset, side: usize) -> Result<Dataset> {
    let from = square_side(dataset)?;
    if side == 0 || side > from || (from - side) % 2 != 0 {
        return Err(Error::config(format!(
            "cannot center-crop {from}x{from} images to {side}x{side}"
        )));
    }
    let off = (from - side) / 2;
    map_images(dataset, side, |img| {
        (0..side)
            .flat_map(|r| img[(r + off) * from + off..(r + off) * from + off + side].iter().copied())
            .collect()
    })
}

/// Center-crops to the largest multiple of `side` that fits (keeping an even
/// margin), then mean-pools to `side x side`. 28x28 MNIST to 8x8 crops the
/// two-pixel border and pools 3x3 blocks.
pub fn fit_downsample(dataset: &Dataset, side: usize) -> Result<Dataset> {
    let from = square_side(dataset)?;
    if side == 0 || side > from {
        return Err(Error::config(format!("cannot downsample {from}x{from} images to {side}x{side}")));
    }
    let mut crop = from - from % side;
    while (from - crop) % 2 != 0 {
        crop -= side;
    }
    if crop == 0 {
        return Err(Error::config(format!("no even-margin crop of {from} is a multiple of {side}")));
    }
    let cropped = if crop == from {
        dataset.clone()
    } else {
        center_crop(dataset, crop)?
    };
    downsample(&cropped, side)
}

/// `k` examples drawn without replacement, in the drawn order.
pub fn subsample(dataset: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    if k > dataset.len() {
        return Err(Error::config(format!(
            "cannot subsample {k} from {} examples",
            dataset.len()
        )));
    }
    let perm = rng::permutation(dataset.len(), &mut rng::seeded(seed));
    Ok(dataset.select(&perm[..k]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_to: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downsample_side: Option<usize>,
}

/// Optional downsampling and subsampling, then a seeded disjoint
/// train/validation partition covering every remaining example.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut ds = match spec.downsample_side {
        Some(side) => fit_downsample(dataset, side)?,
        None => dataset.clone(),
    };
    if let Some(k) = spec.subsample_to {
        ds = subsample(&ds, k, rng::derive_seed(spec.seed, 1))?;
    }
    let perm = rng::permutation(ds.len(), &mut rng::seeded(rng::derive_seed(spec.seed, 2)));
    let n_train = (ds.len() as f64 * spec.train_fraction).round() as usize;
    let train = ds.select(&perm[..n_train]);
    let val = ds.select(&perm[n_train..]);
    let name = ds.name().to_string();
    Ok((train.with_name(format!("{name}:train")), val.with_name(format!("{name}:val"))))
}

/// Index batches for one epoch: a permutation seeded by `(seed, epoch)` cut
/// into chunks of `m`; the last chunk may be short.
pub fn batches(n: usize, m: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let perm = rng::permutation(n, &mut rng::stream(seed, epoch as u64));
    Ok(perm.chunks(m).map(<[usize]>::to_vec).collect())
}
