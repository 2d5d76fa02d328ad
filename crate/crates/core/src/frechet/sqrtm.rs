use nalgebra::{DMatrix, SymmetricEigen};

use super::FrechetError;

/// Principal square root of a symmetric PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdRoot {
    /// Symmetric PSD, `root · root ≈ M`.
    pub root: DMatrix<f64>,
    /// Sum of |λ| over the slightly negative eigenvalues that were zeroed.
    pub clamped_mass: f64,
}

const SYMMETRY_TOL: f64 = 1e-8;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-6;

/// Square root through the symmetric eigendecomposition `M = V Λ Vᵀ`.
///
/// Eigenvalues in `[−τ, 0)` with `τ = 1e-10 · max(1, Σ|Mᵢᵢ| / d)` are
/// treated as zero; anything below `−τ` is `NotPsd`. Asymmetry is measured
/// relative to `max(1, max |Mᵢⱼ|)`.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<PsdRoot, FrechetError> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(FrechetError::DimMismatch { left: d, right: m.ncols() });
    }
    if d == 0 {
        return Ok(PsdRoot { root: m.clone(), clamped_mass: 0.0 });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(FrechetError::EigenFailure);
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(FrechetError::NotSymmetric { max_asymmetry: asym });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, 10_000).ok_or(FrechetError::EigenFailure)?;

    let tau = NEGATIVE_EIGEN_TOL * (m.diagonal().abs().sum() / d as f64).max(1.0);
    let mut clamped_mass = 0.0;
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        if *l < -tau {
            return Err(FrechetError::NotPsd { eigenvalue: *l, tolerance: tau });
        }
        if *l < 0.0 {
            clamped_mass += -*l;
            *l = 0.0;
        }
        *l = l.sqrt();
    }
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&roots) * v.transpose();
    let root = (&r + r.transpose()) * 0.5;

    let residual = (&root * &root - &sym).norm();
    if residual > RECONSTRUCTION_TOL * sym.norm().max(1.0) {
        return Err(FrechetError::EigenFailure);
    }
    Ok(PsdRoot { root, clamped_mass })
}
