use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sqrtm_psd, FrechetError};
use crate::stats::GaussianEstimate;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// ε added to both covariance diagonals on the retry, 0 when none was needed.
    pub jitter_added: f64,
    pub clamped_eigenvalue_mass: f64,
}

/// `value = mean_term + trace_term`, `value ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetDistance {
    pub value: f64,
    /// ‖μr − μt‖²
    pub mean_term: f64,
    /// tr(Σr + Σt − 2(ΣrΣt)^½)
    pub trace_term: f64,
    pub diagnostics: Diagnostics,
}

const JITTER_SCALE: f64 = 1e-6;
const NEGATIVE_TOL: f64 = 1e-8;

/// tr((Σr Σt)^½) through `A = Σr^½`, `tr((A Σt A)^½)`.
fn trace_sqrt_product(cov_r: &DMatrix<f64>, cov_t: &DMatrix<f64>) -> Result<(f64, f64), FrechetError> {
    let a = sqrtm_psd(cov_r)?;
    let inner = &a.root * cov_t * &a.root;
    let inner = (&inner + inner.transpose()) * 0.5;
    let t = sqrtm_psd(&inner)?;
    Ok((t.root.trace(), a.clamped_mass + t.clamped_mass))
}

fn with_jitter(cov: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let mut out = cov.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += eps;
    }
    out
}

/// Frechet distance between N(μr, Σr) and N(μt, Σt).
///
/// Identical parameters give exactly 0. When a square root fails, both
/// covariances get `ε·I` with `ε = 1e-6 · mean diagonal entry` and the
/// computation is retried once.
pub fn frechet_distance_raw(
    mu_r: &DVector<f64>,
    cov_r: &DMatrix<f64>,
    mu_t: &DVector<f64>,
    cov_t: &DMatrix<f64>,
) -> Result<FrechetDistance, FrechetError> {
    let d = mu_r.len();
    for other in [mu_t.len(), cov_r.nrows(), cov_r.ncols(), cov_t.nrows(), cov_t.ncols()] {
        if other != d {
            return Err(FrechetError::DimMismatch { left: d, right: other });
        }
    }
    if mu_r == mu_t && cov_r == cov_t {
        return Ok(FrechetDistance { value: 0.0, mean_term: 0.0, trace_term: 0.0, diagnostics: Diagnostics::default() });
    }
    let mean_term = (mu_r - mu_t).norm_squared();

    let (cov_r, cov_t, jitter, (tr_sqrt, clamped)) = match trace_sqrt_product(cov_r, cov_t) {
        Ok(t) => (cov_r.clone(), cov_t.clone(), 0.0, t),
        Err(first) => {
            let diag_mean = (cov_r.trace() + cov_t.trace()) / (2 * d.max(1)) as f64;
            let eps = JITTER_SCALE * if diag_mean > 0.0 { diag_mean } else { 1.0 };
            log::warn!("matrix square root failed ({first}); retrying with jitter {eps:e}");
            let (r, t) = (with_jitter(cov_r, eps), with_jitter(cov_t, eps));
            let result = trace_sqrt_product(&r, &t)
                .map_err(|e| FrechetError::NumericalFailure(format!("{first}; after jitter {eps:e}: {e}")))?;
            (r, t, eps, result)
        }
    };

    let mut trace_term = cov_r.trace() + cov_t.trace() - 2.0 * tr_sqrt;
    let raw = mean_term + trace_term;
    if raw < 0.0 {
        let scale = 1.0 + mean_term + cov_r.trace().abs() + cov_t.trace().abs();
        if -raw > NEGATIVE_TOL * scale {
            return Err(FrechetError::NumericalFailure(format!("distance evaluated to {raw:e}")));
        }
        trace_term = -mean_term;
    }
    let value = (mean_term + trace_term).max(0.0);
    Ok(FrechetDistance { value, mean_term, trace_term, diagnostics: Diagnostics { jitter_added: jitter, clamped_eigenvalue_mass: clamped } })
}

pub fn frechet_distance(reference: &GaussianEstimate, test: &GaussianEstimate) -> Result<FrechetDistance, FrechetError> {
    frechet_distance_raw(&reference.mean, &reference.cov, &test.mean, &test.cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn fd(mu_r: &[f64], cov_r: &[f64], mu_t: &[f64], cov_t: &[f64]) -> FrechetDistance {
        let d = mu_r.len();
        frechet_distance_raw(
            &DVector::from_column_slice(mu_r),
            &DMatrix::from_row_slice(d, d, cov_r),
            &DVector::from_column_slice(mu_t),
            &DMatrix::from_row_slice(d, d, cov_t),
        )
        .unwrap()
    }

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let b = DMatrix::<f64>::from_fn(d, d + 2, |_, _| StandardNormal.sample(rng));
        &b * b.transpose() / (d + 2) as f64
    }

    #[test]
    fn one_dimensional() {
        let r = fd(&[0.0], &[1.0], &[3.0], &[4.0]);
        assert!((r.value - 10.0).abs() < 1e-10);
        assert_eq!(r.mean_term, 9.0);
        assert!((r.trace_term - 1.0).abs() < 1e-10);
    }

    #[test]
    fn commuting_covariances() {
        let r = fd(&[0.0, 0.0], &[1.0, 0.0, 0.0, 4.0], &[0.0, 0.0], &[9.0, 0.0, 0.0, 16.0]);
        assert!((r.value - 8.0).abs() < 1e-10);
    }

    #[test]
    fn identity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in [1, 3, 6, 20] {
            let (a, b) = (random_spd(d, &mut rng), random_spd(d, &mut rng));
            let mu = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let nu = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            assert!(frechet_distance_raw(&mu, &a, &mu, &a).unwrap().value <= 1e-8);
            let ab = frechet_distance_raw(&mu, &a, &nu, &b).unwrap().value;
            let ba = frechet_distance_raw(&nu, &b, &mu, &a).unwrap().value;
            assert!((ab - ba).abs() <= 1e-8 * ab.max(1.0));
        }
    }

    #[test]
    fn identical_parameters_are_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(12, &mut rng);
        let mu = DVector::from_fn(12, |_, _| StandardNormal.sample(&mut rng));
        assert_eq!(frechet_distance_raw(&mu, &a, &mu, &a).unwrap().value, 0.0);
    }

    #[test]
    fn zero_covariances() {
        let z = DMatrix::zeros(2, 2);
        let r = frechet_distance_raw(&dvector![0.0, 0.0], &z, &dvector![3.0, 4.0], &z).unwrap();
        assert_eq!(r.value, 25.0);
    }

    #[test]
    fn dim_mismatch() {
        let err = frechet_distance_raw(&dvector![0.0], &DMatrix::identity(1, 1), &dvector![0.0, 0.0], &DMatrix::identity(2, 2));
        assert!(matches!(err, Err(FrechetError::DimMismatch { left: 1, right: 2 })));
    }

    #[test]
    fn jitter_recovers_slightly_indefinite_input() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-5]);
        let r = frechet_distance_raw(&dvector![0.0, 0.0], &cov, &dvector![0.0, 0.0], &DMatrix::identity(2, 2));
        assert!(matches!(r, Err(FrechetError::NumericalFailure(_))));
        // below the clamp tolerance, above -ε
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-7]);
        let r = frechet_distance_raw(&dvector![0.0, 0.0], &cov, &dvector![0.0, 0.0], &DMatrix::identity(2, 2)).unwrap();
        assert!(r.diagnostics.jitter_added > 0.0);
        assert!((r.diagnostics.jitter_added - 1e-6 * (1.0 + 2.0 - 1e-7) / 4.0).abs() < 1e-18);
    }

    #[test]
    fn mean_shift_only_changes_mean_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (a, b) = (random_spd(4, &mut rng), random_spd(4, &mut rng));
        let mu = dvector![0.1, 0.2, 0.3, 0.4];
        let c = dvector![1.0, -1.0, 0.5, 0.0];
        let base = frechet_distance_raw(&mu, &a, &mu, &b).unwrap();
        let shifted = frechet_distance_raw(&mu, &a, &(&mu + &c), &b).unwrap();
        assert!((shifted.mean_term - base.mean_term - c.norm_squared()).abs() < 1e-12);
        assert_eq!(shifted.trace_term, base.trace_term);
    }
}
