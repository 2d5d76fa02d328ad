//! Per-song embedding vectors and the matrices that hold them.

mod corpus;
mod features;
mod fmdemb;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use corpus::{embed_corpus, embed_corpus_filtered, embed_file, format_of, CorpusEmbedding, InputFormat, SkippedFile, SongSource};
pub use features::{
    embed_builtin, BUILTIN_DIM, BUILTIN_DIM_WITH_VELOCITY, DENSITY, DURATIONS, INTERVALS, PITCH_CLASS, PITCH_MEAN,
    PITCH_STD, POLYPHONY,
};
pub use fmdemb::{parse_embeddings, read_embeddings, render_embeddings, write_embeddings, FMDEMB_MAGIC};

pub const BUILTIN_VERSION: &str = "builtin-features/1";

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("song has no notes")]
    EmptySong,
    #[error("line {line}: expected FMDEMB 1 <dim> header")]
    BadMagic { line: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite value")]
    NonFiniteValue { line: usize },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate song id {0:?}")]
    DuplicateSongId(String),
    #[error("song id {0:?} contains a tab or line break")]
    InvalidSongId(String),
    #[error("no embeddable songs found")]
    NoEmbeddableSongs,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    BuiltinFeatures,
    ExternalFile,
}

/// Which embedder produced a matrix. Echoed into every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub version: String,
    pub include_velocity: bool,
    /// Scale every row to unit L2 norm after embedding or import.
    pub normalize: bool,
}

impl EmbedderSpec {
    pub fn builtin() -> Self {
        EmbedderSpec { kind: EmbedderKind::BuiltinFeatures, version: BUILTIN_VERSION.into(), include_velocity: false, normalize: false }
    }

    pub fn external() -> Self {
        EmbedderSpec { kind: EmbedderKind::ExternalFile, version: "fmdemb/1".into(), include_velocity: false, normalize: false }
    }

    pub fn dim(&self) -> Option<usize> {
        match self.kind {
            EmbedderKind::BuiltinFeatures if self.include_velocity => Some(BUILTIN_DIM_WITH_VELOCITY),
            EmbedderKind::BuiltinFeatures => Some(BUILTIN_DIM),
            EmbedderKind::ExternalFile => None,
        }
    }
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Display for EmbedderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.version)?;
        if self.include_velocity {
            write!(f, "+velocity")?;
        }
        if self.normalize {
            write!(f, "+l2")?;
        }
        Ok(())
    }
}

/// `n × dim` matrix of finite values with one unique id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    data: DMatrix<f64>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self, EmbedError> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = DMatrix::zeros(rows.len(), dim);
        for (r, (id, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(EmbedError::DimMismatch { line: r + 1, expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFiniteValue { line: r + 1 });
            }
            data.row_mut(r).copy_from_slice(&v);
            ids.push(id);
        }
        Self::from_matrix(ids, data)
    }

    pub fn from_matrix(ids: Vec<String>, data: DMatrix<f64>) -> Result<Self, EmbedError> {
        assert_eq!(ids.len(), data.nrows(), "one id per row");
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if id.contains(['\t', '\n', '\r']) {
                return Err(EmbedError::InvalidSongId(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(EmbedError::DuplicateSongId(id.clone()));
            }
        }
        if let Some(r) = (0..data.nrows()).find(|&r| data.row(r).iter().any(|x| !x.is_finite())) {
            return Err(EmbedError::NonFiniteValue { line: r + 1 });
        }
        Ok(EmbeddingMatrix { ids, data })
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        EmbeddingMatrix { ids: indices.iter().map(|&i| self.ids[i].clone()).collect(), data: self.data.select_rows(indices) }
    }

    /// Rows scaled to unit L2 norm; zero rows stay zero.
    pub fn l2_normalized(&self) -> EmbeddingMatrix {
        let mut data = self.data.clone();
        for mut row in data.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        EmbeddingMatrix { ids: self.ids.clone(), data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_nan() {
        let dup = vec![("a".to_string(), vec![0.0]), ("a".to_string(), vec![1.0])];
        assert!(matches!(EmbeddingMatrix::new(1, dup), Err(EmbedError::DuplicateSongId(_))));
        let nan = vec![("a".to_string(), vec![f64::NAN])];
        assert!(matches!(EmbeddingMatrix::new(1, nan), Err(EmbedError::NonFiniteValue { line: 1 })));
        let tab = vec![("a\tb".to_string(), vec![0.0])];
        assert!(matches!(EmbeddingMatrix::new(1, tab), Err(EmbedError::InvalidSongId(_))));
    }

    #[test]
    fn normalize_rows() {
        let m = EmbeddingMatrix::new(2, vec![("a".into(), vec![3.0, 4.0]), ("z".into(), vec![0.0, 0.0])]).unwrap();
        let n = m.l2_normalized();
        assert_eq!(n.row(0).as_slice(), &[0.6, 0.8]);
        assert_eq!(n.row(1).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn spec_dims() {
        assert_eq!(EmbedderSpec::builtin().dim(), Some(48));
        let v = EmbedderSpec { include_velocity: true, ..EmbedderSpec::builtin() };
        assert_eq!(v.dim(), Some(50));
        assert_eq!(v.to_string(), "builtin-features/1+velocity");
    }
}
