use nalgebra::DVector;

use super::FrechetError;
use crate::embed::EmbeddingMatrix;
use crate::stats::GaussianEstimate;

/// Distance from the reference Gaussian to a single song treated as a
/// point mass: `‖μr − x‖² + tr Σr`.
pub fn per_song_fmd(reference: &GaussianEstimate, song: &DVector<f64>) -> Result<f64, FrechetError> {
    if song.len() != reference.dim() {
        return Err(FrechetError::DimMismatch { left: reference.dim(), right: song.len() });
    }
    Ok((&reference.mean - song).norm_squared() + reference.cov.trace())
}

/// `(song_id, per-song FMD)` for every row, in row order.
pub fn per_song_scores(reference: &GaussianEstimate, songs: &EmbeddingMatrix) -> Result<Vec<(String, f64)>, FrechetError> {
    (0..songs.len()).map(|i| Ok((songs.ids()[i].clone(), per_song_fmd(reference, &songs.row(i))?))).collect()
}

/// Nearest-rank percentile: the `⌈p/100 · N⌉`-th smallest score.
pub fn nearest_rank_cutoff(scores: &[(String, f64)], percent: f64) -> Result<f64, FrechetError> {
    if scores.is_empty() {
        return Err(FrechetError::EmptyInput);
    }
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(FrechetError::BadPercent(percent));
    }
    if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(FrechetError::NonFiniteScore(id.clone()));
    }
    let n = scores.len();
    let rank = ((percent / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    let mut sorted: Vec<f64> = scores.iter().map(|(_, s)| *s).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// Songs scoring at or below the nearest-rank `percent`-th percentile,
/// ordered by score then id. Every song tied at the cutoff is kept.
pub fn percentile_filter(scores: &[(String, f64)], percent: f64) -> Result<Vec<String>, FrechetError> {
    let cutoff = nearest_rank_cutoff(scores, percent)?;
    let mut kept: Vec<&(String, f64)> = scores.iter().filter(|(_, s)| *s <= cutoff).collect();
    kept.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(kept.into_iter().map(|(id, _)| id.clone()).collect())
}
