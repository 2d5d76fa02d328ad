//! Mean and covariance estimators for a sample matrix (rows are samples).
//!
//! | estimator       | covariance                                   | divisor |
//! |-----------------|----------------------------------------------|---------|
//! | `mle`           | sample covariance                            | n − 1   |
//! | `shrinkage`     | (1−α)·S + α·(tr S/d)·I                        | n       |
//! | `ledoit-wolf`   | ρ·(tr S/d)·I + (1−ρ)·S, ρ data-driven        | n       |
//! | `oas`           | same target, oracle-approximating ρ          | n       |
//! | `bootstrap`     | average of B resampled `mle` covariances     | n − 1   |

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SHRINKAGE_ALPHA: f64 = 0.1;
pub const DEFAULT_BOOTSTRAP_B: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least 2 samples, got {n}")]
    InsufficientSamples { n: usize },
    #[error("shrinkage alpha {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("bootstrap needs at least one resample")]
    ZeroResamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Mle,
    Bootstrap,
    #[serde(rename = "shrinkage")]
    BasicShrinkage,
    LedoitWolf,
    Oas,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::Mle, Estimator::Bootstrap, Estimator::BasicShrinkage, Estimator::LedoitWolf, Estimator::Oas];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Bootstrap => "bootstrap",
            Estimator::BasicShrinkage => "shrinkage",
            Estimator::LedoitWolf => "ledoit-wolf",
            Estimator::Oas => "oas",
        }
    }

    pub fn is_shrinkage(self) -> bool {
        matches!(self, Estimator::BasicShrinkage | Estimator::LedoitWolf | Estimator::Oas)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Estimator::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| format!("unknown estimator {s:?}"))
    }
}

/// Estimator choice plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    pub shrinkage_alpha: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { estimator: Estimator::Mle, shrinkage_alpha: DEFAULT_SHRINKAGE_ALPHA, bootstrap_b: DEFAULT_BOOTSTRAP_B, seed: 0 }
    }
}

impl EstimatorConfig {
    pub fn new(estimator: Estimator) -> Self {
        EstimatorConfig { estimator, ..Default::default() }
    }

    pub fn estimate(&self, x: &DMatrix<f64>) -> Result<GaussianEstimate, StatsError> {
        match self.estimator {
            Estimator::Mle => estimate_mle(x),
            Estimator::Bootstrap => estimate_bootstrap(x, self.bootstrap_b, self.seed),
            Estimator::BasicShrinkage => estimate_basic_shrinkage(x, self.shrinkage_alpha),
            Estimator::LedoitWolf => estimate_ledoit_wolf(x),
            Estimator::Oas => estimate_oas(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEstimate {
    pub mean: DVector<f64>,
    /// Symmetric; positive semidefinite for shrinkage estimators.
    pub cov: DMatrix<f64>,
    pub n: usize,
    pub estimator: Estimator,
    /// Shrinkage intensity in [0, 1]; `None` for `mle` and `bootstrap`.
    pub shrinkage_used: Option<f64>,
}

impl GaussianEstimate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn require_samples(x: &DMatrix<f64>) -> Result<usize, StatsError> {
    match x.nrows() {
        n if n < 2 => Err(StatsError::InsufficientSamples { n }),
        n => Ok(n),
    }
}

pub fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let mut mean = DVector::zeros(x.ncols());
    for row in x.row_iter() {
        mean += row.transpose();
    }
    mean / x.nrows() as f64
}

fn centered(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    c
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Mean and `X̃ᵀX̃ / divisor` over centered rows `X̃`, symmetrized.
fn scatter(x: &DMatrix<f64>, divisor: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mean = column_mean(x);
    let xc = centered(x, &mean);
    (mean, symmetrize(&(xc.tr_mul(&xc) / divisor)))
}

/// Negative eigenvalues are zeroed and the matrix rebuilt; PSD input is
/// returned untouched.
pub fn clamp_psd(cov: DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    if d == 0 {
        return cov;
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = (cov.trace() / d as f64).abs().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().all(|&l| l >= -1e-12 * scale) {
        return cov;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()))
}

fn shrink_toward_identity(s: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let d = s.nrows();
    let m = s.trace() / d as f64;
    let mut out = s * (1.0 - rho);
    for i in 0..d {
        out[(i, i)] += rho * m;
    }
    out
}

/// Sample covariance with divisor `n − 1`.
pub fn estimate_mle(x: &DMatrix<f64>) -> Result<GaussianEstimate, StatsError> {
    let n = require_samples(x)?;
    let (mean, cov) = scatter(x, (n - 1) as f64);
    Ok(GaussianEstimate { mean, cov, n, estimator: Estimator::Mle, shrinkage_used: None })
}

/// `(1−α)·S + α·(tr S/d)·I` with `S` the biased (divisor `n`) covariance.
pub fn estimate_basic_shrinkage(x: &DMatrix<f64>, alpha: f64) -> Result<GaussianEstimate, StatsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(StatsError::AlphaOutOfRange(alpha));
    }
    let n = require_samples(x)?;
    let (mean, s) = scatter(x, n as f64);
    let cov = clamp_psd(shrink_toward_identity(&s, alpha));
    Ok(GaussianEstimate { mean, cov, n, estimator: Estimator::BasicShrinkage, shrinkage_used: Some(alpha) })
}

/// Ledoit–Wolf intensity for centered rows `xc` and biased covariance `s`.
fn ledoit_wolf_rho(xc: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    let (n, d) = (xc.nrows() as f64, s.nrows());
    let m = s.trace() / d as f64;
    let s_norm2 = s.norm_squared();
    let d2 = (s - DMatrix::identity(d, d) * m).norm_squared() / d as f64;
    if d2 <= 0.0 {
        return 0.0;
    }
    // ‖x xᵀ − S‖²_F = ‖x‖⁴ − 2·xᵀSx + ‖S‖²_F
    let sum: f64 = xc
        .row_iter()
        .map(|row| {
            let x = row.transpose();
            let xx = x.norm_squared();
            (xx * xx - 2.0 * x.dot(&(s * &x)) + s_norm2).max(0.0)
        })
        .sum();
    let b2 = (sum / (n * n * d as f64)).min(d2);
    (b2 / d2).clamp(0.0, 1.0)
}

pub fn estimate_ledoit_wolf(x: &DMatrix<f64>) -> Result<GaussianEstimate, StatsError> {
    let n = require_samples(x)?;
    let mean = column_mean(x);
    let xc = centered(x, &mean);
    let s = symmetrize(&(xc.tr_mul(&xc) / n as f64));
    let rho = ledoit_wolf_rho(&xc, &s);
    let cov = clamp_psd(shrink_toward_identity(&s, rho));
    Ok(GaussianEstimate { mean, cov, n, estimator: Estimator::LedoitWolf, shrinkage_used: Some(rho) })
}

fn oas_rho(s: &DMatrix<f64>, n: usize) -> f64 {
    let d = s.nrows() as f64;
    let tr = s.trace();
    let tr_s2 = s.norm_squared();
    let num = (1.0 - 2.0 / d) * tr_s2 + tr * tr;
    let den = (n as f64 + 1.0 - 2.0 / d) * (tr_s2 - tr * tr / d);
    if den <= 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Oracle-approximating shrinkage toward `(tr S/d)·I`.
pub fn estimate_oas(x: &DMatrix<f64>) -> Result<GaussianEstimate, StatsError> {
    let n = require_samples(x)?;
    let (mean, s) = scatter(x, n as f64);
    let rho = oas_rho(&s, n);
    let cov = clamp_psd(shrink_toward_identity(&s, rho));
    Ok(GaussianEstimate { mean, cov, n, estimator: Estimator::Oas, shrinkage_used: Some(rho) })
}

/// Row indices of bootstrap resample `b`. Each resample has its own
/// ChaCha8 stream, so resamples are independent of evaluation order.
pub fn bootstrap_indices(n: usize, seed: u64, b: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Averages the means and `n − 1` covariances of `b` resamples.
pub fn estimate_bootstrap(x: &DMatrix<f64>, b: usize, seed: u64) -> Result<GaussianEstimate, StatsError> {
    let n = require_samples(x)?;
    if b == 0 {
        return Err(StatsError::ZeroResamples);
    }
    let parts: Vec<(DVector<f64>, DMatrix<f64>)> = (0..b as u64)
        .into_par_iter()
        .map(|i| scatter(&x.select_rows(&bootstrap_indices(n, seed, i)), (n - 1) as f64))
        .collect();
    let d = x.ncols();
    let (mut mean, mut cov) = (DVector::zeros(d), DMatrix::zeros(d, d));
    for (m, c) in &parts {
        mean += m;
        cov += c;
    }
    let scale = 1.0 / b as f64;
    Ok(GaussianEstimate { mean: mean * scale, cov: symmetrize(&(cov * scale)), n, estimator: Estimator::Bootstrap, shrinkage_used: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn mle_two_points() {
        let est = estimate_mle(&DMatrix::from_row_slice(2, 1, &[0.0, 2.0])).unwrap();
        assert_eq!(est.mean[0], 1.0);
        assert_eq!(est.cov[(0, 0)], 2.0);
    }

    #[test]
    fn insufficient_samples() {
        let one = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        for e in Estimator::ALL {
            assert_eq!(EstimatorConfig::new(e).estimate(&one), Err(StatsError::InsufficientSamples { n: 1 }));
        }
    }

    #[test]
    fn identical_rows_give_zero_covariance() {
        let x = DMatrix::from_fn(5, 3, |_, j| j as f64 + 0.5);
        for e in Estimator::ALL {
            let est = EstimatorConfig::new(e).estimate(&x).unwrap();
            assert_eq!(est.cov, DMatrix::zeros(3, 3), "{e}");
        }
        assert_eq!(estimate_ledoit_wolf(&x).unwrap().shrinkage_used, Some(0.0));
    }

    #[test]
    fn mle_matches_double_loop() {
        let x = normal(100, 4, 1);
        let est = estimate_mle(&x).unwrap();
        let mut mu = [0.0; 4];
        for i in 0..100 {
            for j in 0..4 {
                mu[j] += x[(i, j)] / 100.0;
            }
        }
        let mut cov = DMatrix::zeros(4, 4);
        for i in 0..100 {
            for j in 0..4 {
                for k in 0..4 {
                    cov[(j, k)] += (x[(i, j)] - mu[j]) * (x[(i, k)] - mu[k]) / 99.0;
                }
            }
        }
        assert!(max_abs_diff(&est.cov, &cov) < 1e-12);
    }

    #[test]
    fn basic_shrinkage_endpoints() {
        let x = normal(30, 5, 2);
        let n = 30.0;
        let s = estimate_mle(&x).unwrap().cov * ((n - 1.0) / n);
        let zero = estimate_basic_shrinkage(&x, 0.0).unwrap();
        assert!(max_abs_diff(&zero.cov, &s) < 1e-14);
        let one = estimate_basic_shrinkage(&x, 1.0).unwrap();
        let target = DMatrix::identity(5, 5) * (s.trace() / 5.0);
        assert!(max_abs_diff(&one.cov, &target) < 1e-14);
        assert_eq!(estimate_basic_shrinkage(&x, 1.5), Err(StatsError::AlphaOutOfRange(1.5)));
        assert_eq!(estimate_basic_shrinkage(&x, -0.1), Err(StatsError::AlphaOutOfRange(-0.1)));
    }

    #[test]
    fn basic_shrinkage_by_hand() {
        // biased S = [[4,0],[0,0]]
        let x = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 2.0, 1.0]);
        let est = estimate_basic_shrinkage(&x, 0.5).unwrap();
        assert_eq!(est.cov, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn ledoit_wolf_matches_direct_sum() {
        for seed in 0..20 {
            let x = normal(20, 10, seed);
            let est = estimate_ledoit_wolf(&x).unwrap();
            let (n, d) = (20.0, 10.0);
            let mean = column_mean(&x);
            let xc = centered(&x, &mean);
            let s = xc.tr_mul(&xc) / n;
            let m = s.trace() / d;
            let d2 = (&s - DMatrix::identity(10, 10) * m).norm_squared() / d;
            let sum: f64 = xc.row_iter().map(|r| (r.transpose() * r - &s).norm_squared()).sum();
            let rho = (sum / (n * n * d)).min(d2) / d2;
            assert!((est.shrinkage_used.unwrap() - rho).abs() < 1e-12);
            assert!(rho > 0.0 && rho <= 1.0);
        }
    }

    #[test]
    fn ledoit_wolf_narrows_spectrum() {
        let x = normal(20, 10, 7);
        let n = 20.0;
        let s = estimate_mle(&x).unwrap().cov * ((n - 1.0) / n);
        let spread = |m: &DMatrix<f64>| {
            let e = SymmetricEigen::new(m.clone()).eigenvalues;
            e.max() - e.min()
        };
        assert!(spread(&estimate_ledoit_wolf(&x).unwrap().cov) < spread(&s));
    }

    #[test]
    fn oas_identity_covariance() {
        // rows ±2·e_j with d = 4 give biased S = I exactly
        let d = 4;
        let x = DMatrix::from_fn(2 * d, d, |i, j| if i / 2 == j { if i % 2 == 0 { 2.0 } else { -2.0 } } else { 0.0 });
        let (_, s) = scatter(&x, x.nrows() as f64);
        assert_eq!(s, DMatrix::identity(d, d));
        let est = estimate_oas(&x).unwrap();
        assert_eq!(est.shrinkage_used, Some(1.0));
        assert_eq!(est.cov, DMatrix::identity(d, d));
    }

    #[test]
    fn oas_rho_in_unit_interval() {
        for seed in 0..100 {
            let rho = estimate_oas(&normal(20, 10, seed)).unwrap().shrinkage_used.unwrap();
            assert!(rho > 0.0 && rho <= 1.0);
        }
    }

    /// OAS is expected to shrink harder than Ledoit–Wolf in the small-n
    /// regime. That holds on average but not on every draw; this test
    /// asserts it per draw and is kept for reference.
    #[test]
    #[ignore = "holds on average, not per draw (about 9 of 100 draws violate it)"]
    fn oas_shrinks_more_than_ledoit_wolf_per_draw() {
        for seed in 0..100 {
            let x = normal(20, 10, seed);
            let lw = estimate_ledoit_wolf(&x).unwrap().shrinkage_used.unwrap();
            let oas = estimate_oas(&x).unwrap().shrinkage_used.unwrap();
            assert!(oas >= lw, "seed {seed}: oas {oas} < lw {lw}");
        }
    }

    #[test]
    fn oas_shrinks_more_than_ledoit_wolf_on_average() {
        let (mut lw_sum, mut oas_sum, mut violations) = (0.0, 0.0, 0);
        for seed in 0..100 {
            let x = normal(20, 10, seed);
            let lw = estimate_ledoit_wolf(&x).unwrap().shrinkage_used.unwrap();
            let oas = estimate_oas(&x).unwrap().shrinkage_used.unwrap();
            lw_sum += lw;
            oas_sum += oas;
            violations += usize::from(oas < lw);
        }
        eprintln!("oas < ledoit-wolf on {violations}/100 draws");
        assert!(oas_sum > lw_sum);
        assert!(violations < 25);
    }

    #[test]
    fn shrinkage_consistency_at_large_n() {
        let mix = DMatrix::from_row_slice(4, 4, &[2.0, 0.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.3, 0.5, 0.0, 0.2, 0.0, 0.1, 3.0]);
        let x = normal(10_000, 4, 3) * &mix;
        let mle = estimate_mle(&x).unwrap().cov;
        for e in [Estimator::BasicShrinkage, Estimator::LedoitWolf, Estimator::Oas] {
            let mut cfg = EstimatorConfig::new(e);
            cfg.shrinkage_alpha = 0.0;
            assert!(rel_diff(&cfg.estimate(&x).unwrap().cov, &mle) < 1e-2, "{e}");
        }
        let lw = estimate_ledoit_wolf(&(normal(50_000, 4, 4) * &mix)).unwrap();
        assert!(lw.shrinkage_used.unwrap() < 1e-2);
    }

    #[test]
    fn bootstrap_identity_resample_equals_mle() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 3.0, -1.0]);
        let seed = (0..1000).find(|&s| {
            let mut idx = bootstrap_indices(2, s, 0);
            idx.sort();
            idx == [0, 1]
        });
        let seed = seed.expect("some seed resamples the identity multiset");
        let boot = estimate_bootstrap(&x, 1, seed).unwrap();
        let mle = estimate_mle(&x).unwrap();
        assert!(max_abs_diff(&boot.cov, &mle.cov) < 1e-15);
        assert!((&boot.mean - &mle.mean).abs().max() < 1e-15);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let x = normal(50, 3, 5);
        let a = estimate_bootstrap(&x, 20, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_bootstrap(&x, 20, 9).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, estimate_bootstrap(&x, 20, 10).unwrap());
        assert_eq!(estimate_bootstrap(&x, 0, 1), Err(StatsError::ZeroResamples));
    }

    #[test]
    fn bootstrap_sanity() {
        let x = normal(200, 4, 6);
        let boot = estimate_bootstrap(&x, 5000, 1).unwrap();
        let mle = estimate_mle(&x).unwrap();
        assert!(boot.mean.iter().all(|m| m.abs() < 3.0 / 200f64.sqrt()));
        assert!(rel_diff(&boot.cov, &mle.cov) < 0.1);
    }

    #[test]
    fn shrinkage_outputs_are_psd() {
        for seed in 0..10 {
            let x = normal(5, 12, seed);
            for e in [Estimator::BasicShrinkage, Estimator::LedoitWolf, Estimator::Oas] {
                let est = EstimatorConfig::new(e).estimate(&x).unwrap();
                let tol = 1e-10 * est.cov.trace() / 12.0;
                assert!(SymmetricEigen::new(est.cov.clone()).eigenvalues.min() >= -tol, "{e}");
                assert_eq!(est.cov, est.cov.transpose());
                let rho = est.shrinkage_used.unwrap();
                assert!((0.0..=1.0).contains(&rho));
            }
        }
    }

    #[test]
    fn clamp_psd_removes_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let c = clamp_psd(m);
        let e = SymmetricEigen::new(c.clone()).eigenvalues;
        assert!(e.min() > -1e-12);
        assert!((c.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn estimator_names() {
        for e in Estimator::ALL {
            assert_eq!(e.name().parse::<Estimator>(), Ok(e));
            assert_eq!(serde_json::to_string(&e).unwrap(), format!("\"{}\"", e.name()));
        }
    }
}
