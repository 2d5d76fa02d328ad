use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{frechet_distance, FrechetError};
use crate::stats::EstimatorConfig;

pub const DEFAULT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtrapolationConfig {
    /// Number of subset sizes, at least 3.
    pub points: usize,
    /// Smallest subset size; `max(50, d + 2)` when absent.
    pub n_min: Option<usize>,
    pub seed: u64,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        ExtrapolationConfig { points: DEFAULT_POINTS, n_min: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationPoint {
    pub n: usize,
    pub fmd: f64,
}

/// Least-squares fit of FMD against 1/n over test subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub points: Vec<ExtrapolationPoint>,
    /// FMD extrapolated to infinitely many test songs.
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub n_min: usize,
    pub seed: u64,
}

pub fn default_n_min(dim: usize) -> usize {
    50.max(dim + 2)
}

/// `points` sizes evenly spaced over `[n_min, n]`, both ends included.
pub fn subset_sizes(n_min: usize, n: usize, points: usize) -> Vec<usize> {
    let span = (n - n_min) as f64;
    (0..points).map(|i| n_min + (i as f64 * span / (points - 1) as f64).round() as usize).collect()
}

/// Sorted row indices of subset `index`, drawn without replacement.
pub fn subset_indices(n: usize, size: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut idx = rand::seq::index::sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Ordinary least squares `y = intercept + slope · x`. A flat response
/// gives slope 0 and r² 0.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if syy == 0.0 || sxx == 0.0 {
        return (my, 0.0, 0.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (intercept, slope, (1.0 - ss_res / syy).clamp(0.0, 1.0))
}

/// FMD of growing test subsets against the full reference, extrapolated
/// to `n → ∞` by regressing on `1/n`.
pub fn fmd_inf(
    reference: &DMatrix<f64>,
    test: &DMatrix<f64>,
    estimator: &EstimatorConfig,
    config: &ExtrapolationConfig,
) -> Result<ExtrapolationReport, FrechetError> {
    let (n, d) = (test.nrows(), test.ncols());
    if reference.ncols() != d {
        return Err(FrechetError::DimMismatch { left: reference.ncols(), right: d });
    }
    if config.points < 3 {
        return Err(FrechetError::TooFewPoints(config.points));
    }
    let n_min = config.n_min.unwrap_or_else(|| default_n_min(d)).max(2);
    let needed = n_min + config.points - 1;
    if n < needed {
        return Err(FrechetError::TooFewSamples { n, needed });
    }
    let ref_est = estimator.estimate(reference)?;
    let sizes = subset_sizes(n_min, n, config.points);
    let fmds: Vec<f64> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &size)| {
            let subset = test.select_rows(&subset_indices(n, size, config.seed, i as u64));
            let est = estimator.estimate(&subset)?;
            Ok(frechet_distance(&ref_est, &est)?.value)
        })
        .collect::<Result<_, FrechetError>>()?;

    let x: Vec<f64> = sizes.iter().map(|&s| 1.0 / s as f64).collect();
    let (intercept, slope, r_squared) = ols(&x, &fmds);
    let points = sizes.into_iter().zip(fmds).map(|(n, fmd)| ExtrapolationPoint { n, fmd }).collect();
    Ok(ExtrapolationReport { points, intercept, slope, r_squared, n_min, seed: config.seed })
}
