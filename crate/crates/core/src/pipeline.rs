//! Corpus-to-report composition: embed, estimate, compare.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::embed::{embed_corpus, EmbedError, EmbedderSpec, EmbeddingMatrix};
use crate::frechet::{frechet_distance, Diagnostics, FrechetError};
use crate::stats::{Estimator, EstimatorConfig, StatsError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Frechet(#[from] FrechetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmdReport {
    pub value: f64,
    pub mean_term: f64,
    pub trace_term: f64,
    pub estimator: Estimator,
    pub embedder: EmbedderSpec,
    pub n_ref: usize,
    pub n_test: usize,
    pub shrinkage_ref: Option<f64>,
    pub shrinkage_test: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// FMD between two embedding matrices of equal dimension.
pub fn score_embeddings(
    reference: &EmbeddingMatrix,
    test: &EmbeddingMatrix,
    embedder: &EmbedderSpec,
    estimator: &EstimatorConfig,
) -> Result<FmdReport, PipelineError> {
    if reference.dim() != test.dim() {
        return Err(FrechetError::DimMismatch { left: reference.dim(), right: test.dim() }.into());
    }
    let r = estimator.estimate(reference.matrix())?;
    let t = estimator.estimate(test.matrix())?;
    let fd = frechet_distance(&r, &t)?;
    Ok(FmdReport {
        value: fd.value,
        mean_term: fd.mean_term,
        trace_term: fd.trace_term,
        estimator: estimator.estimator,
        embedder: embedder.clone(),
        n_ref: reference.len(),
        n_test: test.len(),
        shrinkage_ref: r.shrinkage_used,
        shrinkage_test: t.shrinkage_used,
        diagnostics: fd.diagnostics,
    })
}

/// Embeds both corpora with `embedder` and scores them.
pub fn fmd_score(
    reference: &[PathBuf],
    test: &[PathBuf],
    embedder: &EmbedderSpec,
    estimator: &EstimatorConfig,
) -> Result<FmdReport, PipelineError> {
    let r = embed_corpus(reference, embedder)?;
    let t = embed_corpus(test, embedder)?;
    score_embeddings(&r.matrix, &t.matrix, &r.spec, estimator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::write_synth_corpus;

    #[test]
    fn same_corpus_scores_zero() {
        let dir = tempfile::tempdir().unwrap();
        write_synth_corpus(dir.path(), 60, 1).unwrap();
        let paths = [dir.path().to_path_buf()];
        for e in Estimator::ALL {
            let report = fmd_score(&paths, &paths, &EmbedderSpec::builtin(), &EstimatorConfig::new(e)).unwrap();
            assert!(report.value <= 1e-8, "{e}: {}", report.value);
            assert_eq!((report.n_ref, report.n_test), (60, 60));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = EmbeddingMatrix::new(1, vec![("a".into(), vec![0.0]), ("b".into(), vec![1.0])]).unwrap();
        let b = EmbeddingMatrix::new(2, vec![("a".into(), vec![0.0, 1.0]), ("b".into(), vec![1.0, 0.0])]).unwrap();
        let err = score_embeddings(&a, &b, &EmbedderSpec::external(), &EstimatorConfig::default()).unwrap_err();
        assert!(matches!(err, PipelineError::Frechet(FrechetError::DimMismatch { left: 1, right: 2 })));
    }
}
