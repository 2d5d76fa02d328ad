//! Gaussian pitch or velocity noise on MIDI notes.
//!
//! Each note is selected with probability `p`; a selected note's value
//! becomes `clamp(round(v + g))` with `g ~ Normal(μ, σ)`. Pitches stay in
//! `0..=127`, velocities in `1..=127` so that no note turns into a note-off.
//! Note `i` of file `f` draws from ChaCha8 stream `i` seeded with
//! `seed ^ fnv1a64(f)`, so results do not depend on processing order.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::embed::SkippedFile;
use crate::midi::{encode_smf, parse_smf, EventKind, MidiDocument};

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid augmentation: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentTarget {
    Pitch,
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub target: AugmentTarget,
    pub p: f64,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(AugmentError::InvalidSpec(format!("p = {} is outside [0, 1]", self.p)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(AugmentError::InvalidSpec(format!("sigma = {} must be finite and non-negative", self.sigma)));
        }
        if !self.mu.is_finite() {
            return Err(AugmentError::InvalidSpec(format!("mu = {} must be finite", self.mu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteCounts {
    pub notes_total: usize,
    /// Notes selected for noise, whether or not the rounded value changed.
    pub notes_modified: usize,
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn note_rng(seed: u64, file_id: &str, note_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(file_id.as_bytes()));
    rng.set_stream(note_index as u64);
    rng
}

fn noisy(value: u8, g: f64, lo: u8) -> u8 {
    (f64::from(value) + g).round().clamp(f64::from(lo), 127.0) as u8
}

fn set_pitch(kind: &mut EventKind, new: u8) {
    if let EventKind::NoteOn { pitch, .. } | EventKind::NoteOff { pitch, .. } = kind {
        *pitch = new;
    }
}

/// Applies noise to every note of `doc`. `file_id` keys the random streams.
pub fn augment_document(doc: &MidiDocument, spec: &AugmentSpec, file_id: &str) -> Result<(MidiDocument, NoteCounts), AugmentError> {
    spec.validate()?;
    let normal = Normal::new(spec.mu, spec.sigma).map_err(|e| AugmentError::InvalidSpec(e.to_string()))?;
    let mut out = doc.clone();
    let mut counts = NoteCounts { notes_total: doc.notes.len(), notes_modified: 0 };
    for (i, note) in doc.notes.iter().enumerate() {
        let mut rng = note_rng(spec.seed, file_id, i);
        if rng.random::<f64>() >= spec.p {
            continue;
        }
        counts.notes_modified += 1;
        let g = normal.sample(&mut rng);
        match spec.target {
            AugmentTarget::Pitch => {
                let new = noisy(note.pitch, g, 0);
                set_pitch(&mut out.events[note.on_index].kind, new);
                if let Some(off) = note.off_index {
                    set_pitch(&mut out.events[off].kind, new);
                }
            }
            AugmentTarget::Velocity => {
                if let EventKind::NoteOn { velocity, .. } = &mut out.events[note.on_index].kind {
                    *velocity = noisy(note.velocity, g, 1);
                }
            }
        }
    }
    out.refresh_notes();
    Ok((out, counts))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentSummary {
    pub files: usize,
    pub notes_total: usize,
    pub notes_modified: usize,
    pub skipped: Vec<SkippedFile>,
}

fn is_midi(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AugmentError + '_ {
    move |source| AugmentError::Io { path: path.display().to_string(), source }
}

/// Augments every `.mid`/`.midi` file under `in_dir` into the same
/// relative path under `out_dir`. Unparseable files are skipped.
pub fn augment_corpus(in_dir: &Path, out_dir: &Path, spec: &AugmentSpec) -> Result<AugmentSummary, AugmentError> {
    spec.validate()?;
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for entry in WalkDir::new(in_dir).follow_links(false).sort_by_file_name() {
        let entry = entry.map_err(|e| AugmentError::Io {
            path: e.path().unwrap_or(in_dir).display().to_string(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("filesystem loop")),
        })?;
        if entry.file_type().is_file() && is_midi(entry.path()) {
            let rel = entry.path().strip_prefix(in_dir).unwrap_or(entry.path());
            let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            files.push((id, entry.path().to_path_buf()));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let results: Vec<Result<Result<NoteCounts, SkippedFile>, AugmentError>> = files
        .par_iter()
        .map(|(id, path)| {
            let bytes = std::fs::read(path).map_err(io_err(path))?;
            let doc = match parse_smf(&bytes) {
                Ok(doc) => doc,
                Err(e) => return Ok(Err(SkippedFile { id: id.clone(), reason: e.to_string() })),
            };
            let (aug, counts) = augment_document(&doc, spec, id)?;
            let encoded = match encode_smf(&aug) {
                Ok(b) => b,
                Err(e) => return Ok(Err(SkippedFile { id: id.clone(), reason: e.to_string() })),
            };
            let target = out_dir.join(id);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::write(&target, encoded).map_err(io_err(&target))?;
            Ok(Ok(counts))
        })
        .collect();

    let mut summary = AugmentSummary::default();
    for r in results {
        match r? {
            Ok(c) => {
                summary.files += 1;
                summary.notes_total += c.notes_total;
                summary.notes_modified += c.notes_modified;
            }
            Err(skip) => {
                log::warn!("skipped {}: {}", skip.id, skip.reason);
                summary.skipped.push(skip);
            }
        }
    }
    Ok(summary)
}
