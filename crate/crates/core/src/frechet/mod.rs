//! Frechet distance between Gaussians, per-song scores, and large-sample
//! extrapolation.
//!
//! ```text
//! FD = ‖μr − μt‖² + tr(Σr + Σt − 2 (Σr Σt)^½)
//! ```
//!
//! The trace of `(Σr Σt)^½` is taken as `tr((A Σt A)^½)` with `A = Σr^½`,
//! which keeps every intermediate symmetric PSD.

mod distance;
mod extrapolate;
mod outliers;
mod sqrtm;

pub use distance::{frechet_distance, frechet_distance_raw, Diagnostics, FrechetDistance};
pub use extrapolate::{
    default_n_min, fmd_inf, ols, subset_indices, subset_sizes, ExtrapolationConfig, ExtrapolationPoint, ExtrapolationReport,
    DEFAULT_POINTS,
};
pub use outliers::{nearest_rank_cutoff, per_song_fmd, per_song_scores, percentile_filter};
pub use sqrtm::{sqrtm_psd, PsdRoot};

use crate::stats::StatsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrechetError {
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e} below -{tolerance:e})")]
    NotPsd { eigenvalue: f64, tolerance: f64 },
    #[error("eigendecomposition failed")]
    EigenFailure,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no scores given")]
    EmptyInput,
    #[error("percentile {0} is outside (0, 100]")]
    BadPercent(f64),
    #[error("song {0:?} has a non-finite score")]
    NonFiniteScore(String),
    #[error("extrapolation needs at least {needed} test songs, got {n}")]
    TooFewSamples { n: usize, needed: usize },
    #[error("extrapolation needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
