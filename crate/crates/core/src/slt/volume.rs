use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::AnalyticPotential;
use crate::{rng, Error, Result};

/// Minimum number of samples that must land in every sublevel set.
pub const MIN_HITS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumePoint {
    pub epsilon: f64,
    pub hits: usize,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFit {
    /// Least-squares slope of `log V` against `log eps`.
    pub lambda_fit: f64,
    pub r_squared: f64,
    pub points: Vec<VolumePoint>,
    /// Number of grid points used by the fit.
    pub fit_points: usize,
}

/// Monte-Carlo estimate of `V(eps) = vol{w in box : K(w) <= eps}` on a grid,
/// with `lambda` read off as the log-log slope (`V ~ eps^lambda`).
pub fn volume_scaling_oracle(
    potential: &AnalyticPotential,
    epsilon_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VolumeFit> {
    volume_scaling_oracle_windowed(potential, epsilon_grid, samples, seed, None)
}

/// As [`volume_scaling_oracle`], fitting only grid points within
/// `fit_decades` decades of the smallest epsilon. Potentials with log
/// corrections need the fit pushed toward `eps -> 0`.
pub fn volume_scaling_oracle_windowed(
    potential: &AnalyticPotential,
    epsilon_grid: &[f64],
    samples: usize,
    seed: u64,
    fit_decades: Option<f64>,
) -> Result<VolumeFit> {
    let d = potential.dimension;
    if d == 0 || d > 4 {
        return Err(Error::config(format!("volume oracle supports dimension 1..=4, got {d}")));
    }
    if epsilon_grid.len() < 2 || epsilon_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::config("epsilon grid needs at least two positive values"));
    }
    let mut grid = epsilon_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::config(format!(
            "epsilon grid spans {:.2} decades, need at least 2",
            (hi / lo).log10()
        )));
    }
    if !(potential.half_width > 0.0) {
        return Err(Error::config("potential box half-width must be positive"));
    }

    let h = potential.half_width;
    let box_volume = (2.0 * h).powi(d as i32);
    let mut hits = vec![0usize; grid.len()];
    let mut r = rng::seeded(seed);
    let mut w = vec![0.0; d];
    for _ in 0..samples {
        for x in w.iter_mut() {
            *x = r.random_range(-h..h);
        }
        let k = potential.eval(&w);
        // grid is sorted: count every threshold the value falls under
        let first = grid.partition_point(|&e| e < k);
        for c in &mut hits[first..] {
            *c += 1;
        }
    }

    let points: Vec<VolumePoint> = grid
        .iter()
        .zip(&hits)
        .map(|(&epsilon, &h)| VolumePoint {
            epsilon,
            hits: h,
            volume: box_volume * h as f64 / samples as f64,
        })
        .collect();
    if let Some(p) = points.iter().find(|p| p.hits < MIN_HITS) {
        return Err(Error::InsufficientSamples {
            epsilon: p.epsilon,
            hits: p.hits,
            required: MIN_HITS,
        });
    }

    let limit = fit_decades.map_or(f64::INFINITY, |dec| lo * 10f64.powf(dec) * (1.0 + 1e-12));
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.epsilon <= limit)
        .map(|p| (p.epsilon.ln(), p.volume.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::config("fit window contains fewer than two grid points"));
    }
    let (slope, r_squared) = least_squares(&xs, &ys);
    Ok(VolumeFit {
        lambda_fit: slope,
        r_squared,
        fit_points: xs.len(),
        points,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, decades: usize, per_decade: usize) -> Vec<f64> {
        (0..=decades * per_decade)
            .map(|i| lo * 10f64.powf(i as f64 / per_decade as f64))
            .collect()
    }

    #[test]
    fn rejects_narrow_grid() {
        let p = AnalyticPotential::quadratic_1d(1.0);
        assert!(volume_scaling_oracle(&p, &[1e-3, 1e-2], 1000, 0).is_err());
    }

    #[test]
    fn sparse_bins_are_insufficient() {
        let p = AnalyticPotential::quadratic_2d(1.0);
        let err = volume_scaling_oracle(&p, &grid(1e-6, 2, 2), 10_000, 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }

    #[test]
    fn one_dimensional_quadratic_slope() {
        let p = AnalyticPotential::quadratic_1d(0.11);
        let fit = volume_scaling_oracle(&p, &grid(1e-4, 2, 4), 200_000, 1).unwrap();
        assert!((fit.lambda_fit - 0.5).abs() < 0.05, "{fit:?}");
        assert!(fit.r_squared > 0.99);
    }
}
