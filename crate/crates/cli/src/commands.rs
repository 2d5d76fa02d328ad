use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fmd_core::abc::{clean_abc, join_tunebook, split_tunebook};
use fmd_core::augment::{augment_corpus, AugmentSpec};
use fmd_core::embed::{
    embed_corpus, embed_corpus_filtered, format_of, read_embeddings, write_embeddings, CorpusEmbedding, EmbedderSpec,
    InputFormat, SongSource,
};
use fmd_core::frechet::{fmd_inf, nearest_rank_cutoff, per_song_scores, percentile_filter, ExtrapolationConfig};
use fmd_core::midi::{encode_smf, parse_smf};
use fmd_core::mtf::{decode_mtf, encode_mtf};
use fmd_core::pipeline::{score_embeddings, PipelineError};
use serde::Serialize;
use serde_json::json;

use crate::report::Report;
use crate::{
    AugmentArgs, CleanAbcArgs, Cli, Command, ConvertArgs, ConvertTarget, CorpusPair, EmbedArgs, ExtrapolateArgs, PersongArgs,
    ScoreArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Embed(a) => embed(cli, a),
        Command::Score(a) => score(cli, a),
        Command::Persong(a) => persong(cli, a),
        Command::Extrapolate(a) => extrapolate(cli, a),
        Command::Convert(a) => convert(cli, a),
        Command::CleanAbc(a) => clean(cli, a),
        Command::Augment(a) => augment(cli, a),
    }
}

fn load_side(paths: &[PathBuf], emb: Option<&PathBuf>, spec: &EmbedderSpec, side: &str) -> Result<CorpusEmbedding> {
    let loaded = match emb {
        Some(file) => {
            let mut matrix = read_embeddings(file).map_err(PipelineError::from)?;
            if spec.normalize {
                matrix = matrix.l2_normalized();
            }
            let sources = matrix.ids().iter().map(|id| SongSource { id: id.clone(), path: file.clone() }).collect();
            let spec = EmbedderSpec { normalize: spec.normalize, ..EmbedderSpec::external() };
            CorpusEmbedding { matrix, sources, skipped: Vec::new(), spec }
        }
        None => embed_corpus(paths, spec).map_err(PipelineError::from)?,
    };
    log::info!("{side}: {} songs, dim {}, {} skipped", loaded.matrix.len(), loaded.matrix.dim(), loaded.skipped_count());
    Ok(loaded)
}

fn load_pair(pair: &CorpusPair, spec: &EmbedderSpec) -> Result<(CorpusEmbedding, CorpusEmbedding)> {
    let r = load_side(&pair.reference, pair.ref_emb.as_ref(), spec, "reference").context("loading reference corpus")?;
    let t = load_side(&pair.test, pair.test_emb.as_ref(), spec, "test").context("loading test corpus")?;
    Ok((r, t))
}

#[derive(Serialize)]
struct Skipped<'a> {
    id: &'a str,
    reason: &'a str,
}

fn skipped_list(c: &CorpusEmbedding) -> Vec<Skipped<'_>> {
    c.skipped.iter().map(|s| Skipped { id: &s.id, reason: &s.reason }).collect()
}

fn embed(cli: &Cli, a: &EmbedArgs) -> Result<()> {
    let spec = a.embedder.spec();
    let corpus = embed_corpus_filtered(&a.paths, &spec, a.format.map(InputFormat::from)).map_err(PipelineError::from)?;
    write_embeddings(&corpus.matrix, &a.out).map_err(PipelineError::from)?;
    let (n, dim) = (corpus.matrix.len(), corpus.matrix.dim());
    let mut report = Report::new(
        cli,
        "embed",
        json!({ "out": a.out, "n": n, "dim": dim, "skipped_count": corpus.skipped_count(), "skipped": skipped_list(&corpus) }),
    )?;
    report.embedder = Some(corpus.spec.clone());
    report.n_ref = Some(n);
    report.emit(cli, || format!("embedded {n} songs (dim {dim}), skipped {}, wrote {}\n", corpus.skipped_count(), a.out.display()))
}

fn score(cli: &Cli, a: &ScoreArgs) -> Result<()> {
    let (r, t) = load_pair(&a.corpora, &a.embedder.spec())?;
    let est = a.estimator.config();
    let fmd = score_embeddings(&r.matrix, &t.matrix, &r.spec, &est)?;
    let mut report = Report::new(
        cli,
        "score",
        json!({
            "value": fmd.value,
            "mean_term": fmd.mean_term,
            "trace_term": fmd.trace_term,
            "shrinkage_ref": fmd.shrinkage_ref,
            "shrinkage_test": fmd.shrinkage_test,
        }),
    )?;
    report.seed = Some(est.seed);
    report.estimator = Some(est);
    report.embedder = Some(fmd.embedder.clone());
    report.n_ref = Some(fmd.n_ref);
    report.n_test = Some(fmd.n_test);
    report.diagnostics = json!({
        "jitter_added": fmd.diagnostics.jitter_added,
        "clamped_eigenvalue_mass": fmd.diagnostics.clamped_eigenvalue_mass,
        "skipped_ref": r.skipped_count(),
        "skipped_test": t.skipped_count(),
    });
    report.emit(cli, || {
        format!(
            "FMD {:.6} (mean term {:.6}, trace term {:.6}) estimator {} n_ref {} n_test {}\n",
            fmd.value, fmd.mean_term, fmd.trace_term, fmd.estimator, fmd.n_ref, fmd.n_test
        )
    })
}

/// File path of a song id relative to `--copy-to`; ABC tune ids lose their `#n`.
fn copy_rel(source: &SongSource) -> &str {
    match format_of(&source.path) {
        Some(InputFormat::Abc) => source.id.rsplit_once('#').map_or(&source.id, |(file, _)| file),
        _ => &source.id,
    }
}

fn copy_selected(test: &CorpusEmbedding, selected: &[String], dir: &Path) -> Result<usize> {
    let mut copied = BTreeSet::new();
    for id in selected {
        let source = test.sources.iter().find(|s| &s.id == id).expect("selected ids come from the test corpus");
        if format_of(&source.path).is_none() {
            bail!("cannot copy songs of {}: not a song file", source.path.display());
        }
        let rel = copy_rel(source);
        if !copied.insert(rel.to_string()) {
            continue;
        }
        let target = dir.join(rel);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::copy(&source.path, &target).with_context(|| format!("copying {} to {}", source.path.display(), target.display()))?;
    }
    Ok(copied.len())
}

fn persong(cli: &Cli, a: &PersongArgs) -> Result<()> {
    let (r, t) = load_pair(&a.corpora, &a.embedder.spec())?;
    let est = a.estimator.config();
    let reference = est.estimate(r.matrix.matrix()).map_err(PipelineError::from)?;
    let mut scores = per_song_scores(&reference, &t.matrix).map_err(PipelineError::from)?;
    let cutoff = nearest_rank_cutoff(&scores, a.percentile).map_err(PipelineError::from)?;
    let selected = percentile_filter(&scores, a.percentile).map_err(PipelineError::from)?;
    scores.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    let copied = match &a.copy_to {
        Some(dir) => Some(copy_selected(&t, &selected, dir)?),
        None => None,
    };

    let rows: Vec<_> = scores.iter().map(|(id, s)| json!({ "song_id": id, "score": s })).collect();
    let mut report = Report::new(
        cli,
        "persong",
        json!({ "percentile": a.percentile, "cutoff": cutoff, "scores": rows, "selected": selected, "files_copied": copied }),
    )?;
    report.seed = Some(est.seed);
    report.estimator = Some(est);
    report.embedder = Some(r.spec.clone());
    report.n_ref = Some(r.matrix.len());
    report.n_test = Some(t.matrix.len());
    report.diagnostics = json!({ "skipped_ref": r.skipped_count(), "skipped_test": t.skipped_count() });
    report.emit(cli, || {
        let mut out = String::new();
        for (id, s) in &scores {
            let mark = if *s <= cutoff { "*" } else { " " };
            writeln!(out, "{mark} {s:>14.6}  {id}").unwrap();
        }
        writeln!(out, "{} of {} songs at or below percentile {} (cutoff {cutoff:.6})", selected.len(), scores.len(), a.percentile)
            .unwrap();
        out
    })
}

fn extrapolate(cli: &Cli, a: &ExtrapolateArgs) -> Result<()> {
    let (r, t) = load_pair(&a.corpora, &a.embedder.spec())?;
    let est = a.estimator.config();
    let cfg = ExtrapolationConfig { points: a.points, n_min: a.n_min, seed: est.seed };
    let fit = fmd_inf(r.matrix.matrix(), t.matrix.matrix(), &est, &cfg).map_err(PipelineError::from)?;
    let x: Vec<f64> = fit.points.iter().map(|p| 1.0 / p.n as f64).collect();
    let y: Vec<f64> = fit.points.iter().map(|p| p.fmd).collect();
    let mut report = Report::new(
        cli,
        "extrapolate",
        json!({
            "fmd_inf": fit.intercept,
            "slope": fit.slope,
            "r_squared": fit.r_squared,
            "n_min": fit.n_min,
            "points": fit.points,
            "plot": { "x_inverse_n": x, "y_fmd": y },
        }),
    )?;
    report.seed = Some(est.seed);
    report.estimator = Some(est);
    report.embedder = Some(r.spec.clone());
    report.n_ref = Some(r.matrix.len());
    report.n_test = Some(t.matrix.len());
    report.diagnostics = json!({ "skipped_ref": r.skipped_count(), "skipped_test": t.skipped_count() });
    report.emit(cli, || {
        let mut out = String::from("       n            FMD\n");
        for p in &fit.points {
            writeln!(out, "{:>8} {:>14.6}", p.n, p.fmd).unwrap();
        }
        writeln!(out, "FMD-inf {:.6} (slope {:.6}, r² {:.4})", fit.intercept, fit.slope, fit.r_squared).unwrap();
        out
    })
}

fn convert(cli: &Cli, a: &ConvertArgs) -> Result<()> {
    let input = &a.input;
    let doc = match a.to {
        ConvertTarget::Mtf => {
            let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
            let doc = parse_smf(&bytes).with_context(|| format!("parsing {}", input.display()))?;
            std::fs::write(&a.output, encode_mtf(&doc)).with_context(|| format!("writing {}", a.output.display()))?;
            doc
        }
        ConvertTarget::Midi => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let doc = decode_mtf(&text).with_context(|| format!("parsing {}", input.display()))?;
            let bytes = encode_smf(&doc).with_context(|| format!("encoding {}", input.display()))?;
            std::fs::write(&a.output, bytes).with_context(|| format!("writing {}", a.output.display()))?;
            doc
        }
    };
    let (events, notes) = (doc.events.len(), doc.notes.len());
    let report = Report::new(
        cli,
        "convert",
        json!({ "output": a.output, "division": doc.header.division, "tracks": doc.header.track_count, "events": events, "notes": notes }),
    )?;
    report.emit(cli, || format!("wrote {} ({events} events, {notes} notes)\n", a.output.display()))
}

fn clean(cli: &Cli, a: &CleanAbcArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let book = split_tunebook(&text, &a.input.display().to_string());
    let voices_added = book.tunes.iter().filter(|t| !t.has_voice()).count();
    let cleaned: Vec<_> = book.tunes.iter().map(clean_abc).collect();
    std::fs::write(&a.output, join_tunebook(&cleaned)).with_context(|| format!("writing {}", a.output.display()))?;
    let report = Report::new(
        cli,
        "clean-abc",
        json!({ "output": a.output, "tunes": cleaned.len(), "skipped": book.skipped_count, "voices_added": voices_added }),
    )?;
    report.emit(cli, || {
        format!("cleaned {} tunes ({voices_added} given V:1, {} skipped) into {}\n", cleaned.len(), book.skipped_count, a.output.display())
    })
}

fn augment(cli: &Cli, a: &AugmentArgs) -> Result<()> {
    let spec = AugmentSpec { target: a.target.into(), p: a.p, mu: a.mu, sigma: a.sigma, seed: a.seed };
    let summary = augment_corpus(&a.in_dir, &a.out_dir, &spec)?;
    let skipped: Vec<_> = summary.skipped.iter().map(|s| Skipped { id: &s.id, reason: &s.reason }).collect();
    let mut report = Report::new(
        cli,
        "augment",
        json!({
            "files": summary.files,
            "notes_total": summary.notes_total,
            "notes_modified": summary.notes_modified,
            "skipped": skipped,
            "spec": spec,
        }),
    )?;
    report.seed = Some(a.seed);
    report.emit(cli, || {
        format!(
            "augmented {} files: {} of {} notes modified, {} skipped\n",
            summary.files,
            summary.notes_modified,
            summary.notes_total,
            summary.skipped.len()
        )
    })
}
