//! Corpus discovery and embedding.
//!
//! Song ids are paths relative to the root that was given, with `/`
//! separators. A file given directly is identified by its file name. Each
//! tune in an ABC file gets `<path>#<n>`, `n` being its `X:` block index.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{embed_builtin, read_embeddings, EmbedError, EmbedderSpec, EmbeddingMatrix};
use crate::abc::{clean_abc, split_tunebook, tune_notes, ABC_TICKS_PER_QUARTER};
use crate::midi::parse_smf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Midi,
    Abc,
}

pub fn format_of(path: &Path) -> Option<InputFormat> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "mid" | "midi" => Some(InputFormat::Midi),
        "abc" => Some(InputFormat::Abc),
        _ => None,
    }
}

fn is_fmdemb(path: &Path) -> bool {
    path.is_file() && path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("fmdemb"))
}

/// A file (or one tune of a file) that could not be embedded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub id: String,
    pub reason: String,
}

/// Where a matrix row came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SongSource {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CorpusEmbedding {
    pub matrix: EmbeddingMatrix,
    /// One entry per matrix row, same order.
    pub sources: Vec<SongSource>,
    pub skipped: Vec<SkippedFile>,
    /// The embedder actually used; `ExternalFile` when an FMDEMB file was read.
    pub spec: EmbedderSpec,
}

impl CorpusEmbedding {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }
}

struct Candidate {
    rel: String,
    path: PathBuf,
}

fn rel_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn discover(paths: &[PathBuf], only: Option<InputFormat>) -> Result<Vec<Candidate>, EmbedError> {
    let wanted = |p: &Path| format_of(p).is_some_and(|f| only.is_none_or(|o| o == f));
    let mut out = Vec::new();
    for root in paths {
        let meta = std::fs::metadata(root).map_err(|source| EmbedError::Io { path: root.display().to_string(), source })?;
        if meta.is_file() {
            if wanted(root) {
                let rel = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                out.push(Candidate { rel, path: root.clone() });
            } else {
                log::warn!("{}: not a selected song file type, ignored", root.display());
            }
            continue;
        }
        for entry in WalkDir::new(root).follow_links(false).sort_by_file_name() {
            let entry = entry.map_err(|e| EmbedError::Io {
                path: e.path().unwrap_or(root).display().to_string(),
                source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("filesystem loop")),
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            if wanted(entry.path()) {
                out.push(Candidate { rel: rel_id(root, entry.path()), path: entry.path().to_path_buf() });
            }
        }
    }
    Ok(out)
}

type Embedded = (String, Vec<f64>);

/// Embeds one file. MIDI files yield at most one row, ABC files one row
/// per embeddable tune.
pub fn embed_file(path: &Path, id: &str, spec: &EmbedderSpec) -> Vec<Result<Embedded, SkippedFile>> {
    let skip = |id: &str, reason: String| SkippedFile { id: id.to_string(), reason };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return vec![Err(skip(id, format!("read failed: {e}")))],
    };
    let embed = |notes: &[_], tpq| embed_builtin(notes, tpq, spec.include_velocity);
    match format_of(path) {
        Some(InputFormat::Midi) => {
            let result = parse_smf(&bytes)
                .map_err(|e| e.to_string())
                .and_then(|doc| embed(&doc.notes, u64::from(doc.header.division)).map_err(|e| e.to_string()));
            vec![result.map(|v| (id.to_string(), v)).map_err(|reason| skip(id, reason))]
        }
        Some(InputFormat::Abc) => {
            let text = match String::from_utf8(bytes) {
                Ok(t) => t,
                Err(_) => return vec![Err(skip(id, "not valid UTF-8".into()))],
            };
            let book = split_tunebook(&text, id);
            let mut out: Vec<_> = book
                .tunes
                .iter()
                .map(|tune| {
                    let notes = tune_notes(&clean_abc(tune));
                    embed(&notes, ABC_TICKS_PER_QUARTER)
                        .map(|v| (tune.source_id.clone(), v))
                        .map_err(|e| skip(&tune.source_id, e.to_string()))
                })
                .collect();
            if book.skipped_count > 0 {
                out.push(Err(skip(id, format!("{} malformed tune block(s)", book.skipped_count))));
            }
            if book.tunes.is_empty() && book.skipped_count == 0 {
                out.push(Err(skip(id, "no tunes".into())));
            }
            out
        }
        None => vec![Err(skip(id, "unsupported file type".into()))],
    }
}

/// Embeds every `.mid`, `.midi` and `.abc` file under `paths`, or reads a
/// single `.fmdemb` file. Rows are sorted by song id. Directory walks do
/// not follow symlinks.
pub fn embed_corpus(paths: &[PathBuf], spec: &EmbedderSpec) -> Result<CorpusEmbedding, EmbedError> {
    embed_corpus_filtered(paths, spec, None)
}

/// [`embed_corpus`] restricted to one input format when `only` is set.
pub fn embed_corpus_filtered(paths: &[PathBuf], spec: &EmbedderSpec, only: Option<InputFormat>) -> Result<CorpusEmbedding, EmbedError> {
    if let [single] = paths {
        if is_fmdemb(single) {
            let mut matrix = read_embeddings(single)?;
            if matrix.is_empty() {
                return Err(EmbedError::NoEmbeddableSongs);
            }
            if spec.normalize {
                matrix = matrix.l2_normalized();
            }
            let sources = matrix.ids().iter().map(|id| SongSource { id: id.clone(), path: single.clone() }).collect();
            let spec = EmbedderSpec { normalize: spec.normalize, ..EmbedderSpec::external() };
            return Ok(CorpusEmbedding { matrix, sources, skipped: Vec::new(), spec });
        }
    }

    let candidates = discover(paths, only)?;
    let results: Vec<_> = candidates
        .par_iter()
        .map(|c| {
            embed_file(&c.path, &c.rel, spec).into_iter().map(|r| (r, c.path.clone())).collect::<Vec<_>>()
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (result, path) in results.into_iter().flatten() {
        match result {
            Ok((id, v)) => rows.push((id, v, path)),
            Err(s) => {
                log::warn!("skipped {}: {}", s.id, s.reason);
                skipped.push(s);
            }
        }
    }
    if rows.is_empty() {
        return Err(EmbedError::NoEmbeddableSongs);
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    skipped.sort_by(|a, b| a.id.cmp(&b.id));

    let spec = EmbedderSpec { include_velocity: spec.include_velocity, normalize: spec.normalize, ..EmbedderSpec::builtin() };
    let dim = spec.dim().expect("builtin embedder has a fixed dimension");
    let sources = rows.iter().map(|(id, _, path)| SongSource { id: id.clone(), path: path.clone() }).collect();
    let mut matrix = EmbeddingMatrix::new(dim, rows.into_iter().map(|(id, v, _)| (id, v)).collect())?;
    if spec.normalize {
        matrix = matrix.l2_normalized();
    }
    Ok(CorpusEmbedding { matrix, sources, skipped, spec })
}
