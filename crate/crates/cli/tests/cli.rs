use std::path::Path;
use std::process::{Command, Output};

use fmd_core::synth::write_synth_corpus;
use serde_json::Value;
use tempfile::TempDir;

fn fmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmd")).args(args).env_remove("FMD_THREADS").output().expect("run fmd")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "fmd failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("one JSON document on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Corpora {
    dir: TempDir,
}

impl Corpora {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_synth_corpus(&dir.path().join("ref"), 80, 1).unwrap();
        write_synth_corpus(&dir.path().join("test"), 40, 2).unwrap();
        Corpora { dir }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn score_report_fields() {
    let c = Corpora::new();
    let report_path = c.path("report.json");
    let out = fmd(&[
        "--json",
        "--report",
        s(&report_path),
        "score",
        "--ref",
        s(&c.path("ref")),
        "--test",
        s(&c.path("test")),
        "--estimator",
        "oas",
        "--seed",
        "5",
    ]);
    let v = json(&out);
    assert_eq!(v["schema"], "fmd-report/1");
    assert_eq!(v["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["seed"], 5);
    assert_eq!(v["estimator"]["estimator"], "oas");
    assert_eq!(v["embedder"]["kind"], "builtin_features");
    assert_eq!(v["n_ref"], 80);
    assert_eq!(v["n_test"], 40);
    assert!(v["config"]["command"]["score"].is_object());
    assert!(v["config"].get("threads").is_none());
    assert!(v["diagnostics"]["jitter_added"].is_number());
    let value = v["result"]["value"].as_f64().unwrap();
    assert!(value > 0.0);
    let rho = v["result"]["shrinkage_ref"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rho));

    let file: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn identical_corpora_score_zero() {
    let c = Corpora::new();
    let out = fmd(&["--json", "score", "--ref", s(&c.path("ref")), "--test", s(&c.path("ref"))]);
    assert_eq!(json(&out)["result"]["value"].as_f64(), Some(0.0));
}

#[test]
fn human_output_is_one_line() {
    let c = Corpora::new();
    let out = fmd(&["score", "--ref", s(&c.path("ref")), "--test", s(&c.path("test"))]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("FMD "), "{text}");
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn embed_then_score_from_files_matches_direct_score() {
    let c = Corpora::new();
    let (r, t) = (c.path("r.fmdemb"), c.path("t.fmdemb"));
    let e = json(&fmd(&["--json", "embed", s(&c.path("ref")), "--out", s(&r)]));
    assert_eq!(e["result"]["n"], 80);
    assert_eq!(e["result"]["dim"], 48);
    json(&fmd(&["--json", "embed", s(&c.path("test")), "--out", s(&t)]));
    assert!(std::fs::read_to_string(&r).unwrap().starts_with("FMDEMB 1 48\n"));

    let direct = json(&fmd(&["--json", "score", "--ref", s(&c.path("ref")), "--test", s(&c.path("test"))]));
    let files = json(&fmd(&["--json", "score", "--ref-emb", s(&r), "--test-emb", s(&t)]));
    assert_eq!(direct["result"]["value"], files["result"]["value"]);
    assert_eq!(files["embedder"]["kind"], "external_file");
}

#[test]
fn embed_three_files_by_path() {
    let c = Corpora::new();
    let files: Vec<_> = (0..3).map(|i| c.path("ref").join(format!("song_{i:05}.mid"))).collect();
    let out = c.path("three.fmdemb");
    let mut args = vec!["--json", "embed", "--embedder", "builtin-velocity", "--out", s(&out)];
    args.extend(files.iter().map(|p| s(p)));
    assert_eq!(json(&fmd(&args))["result"]["n"], 3);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "FMDEMB 1 50");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split('\t').nth(1).unwrap().split(' ').count() == 50));
}

#[test]
fn persong_selection_and_copy() {
    let c = Corpora::new();
    let all = json(&fmd(&["--json", "persong", "--ref", s(&c.path("ref")), "--test", s(&c.path("test")), "--percentile", "100"]));
    assert_eq!(all["result"]["selected"].as_array().unwrap().len(), 40);
    let scores = all["result"]["scores"].as_array().unwrap();
    assert!(scores.windows(2).all(|w| w[0]["score"].as_f64() <= w[1]["score"].as_f64()));

    let picked = c.path("picked");
    let five = json(&fmd(&[
        "--json",
        "persong",
        "--ref",
        s(&c.path("ref")),
        "--test",
        s(&c.path("test")),
        "--percentile",
        "5",
        "--copy-to",
        s(&picked),
    ]));
    let selected = five["result"]["selected"].as_array().unwrap();
    assert_eq!(selected.len(), 2);
    for id in selected {
        assert!(picked.join(id.as_str().unwrap()).is_file());
    }
    assert_eq!(std::fs::read_dir(&picked).unwrap().count(), 2);
}

#[test]
fn extrapolate_reports_fit() {
    let c = Corpora::new();
    let v = json(&fmd(&["--json", "extrapolate", "--ref", s(&c.path("ref")), "--test", s(&c.path("ref")), "--points", "4"]));
    let r2 = v["result"]["r_squared"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r2));
    assert_eq!(v["result"]["points"].as_array().unwrap().len(), 4);
    assert_eq!(v["result"]["n_min"], 50);
}

#[test]
fn convert_round_trip_is_byte_identical() {
    let c = Corpora::new();
    let mid = c.path("ref").join("song_00003.mid");
    let (mtf, back) = (c.path("a.mtf"), c.path("back.mid"));
    json(&fmd(&["--json", "convert", "--to", "mtf", s(&mid), s(&mtf)]));
    assert!(std::fs::read_to_string(&mtf).unwrap().starts_with("MTF v1 "));
    json(&fmd(&["--json", "convert", "--to", "midi", s(&mtf), s(&back)]));
    assert_eq!(std::fs::read(&mid).unwrap(), std::fs::read(&back).unwrap());
}

#[test]
fn clean_abc_inserts_voice_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let book = dir.path().join("book.abc");
    std::fs::write(&book, "X:1\nT:A\nK:C\n  CDEF|\n\tGABc|\n\nX:2\nT:B\nK:G\nV:1\n GABc|\n").unwrap();
    let (once, twice) = (dir.path().join("once.abc"), dir.path().join("twice.abc"));
    let v = json(&fmd(&["--json", "clean-abc", s(&book), s(&once)]));
    assert_eq!(v["result"]["tunes"], 2);
    assert_eq!(v["result"]["voices_added"], 1);
    let text = std::fs::read_to_string(&once).unwrap();
    assert_eq!(text, "X:1\nT:A\nK:C\nV:1\nCDEF|\nGABc|\n\nX:2\nT:B\nK:G\nV:1\nGABc|\n");
    json(&fmd(&["--json", "clean-abc", s(&once), s(&twice)]));
    assert_eq!(std::fs::read_to_string(&twice).unwrap(), text);
}

#[test]
fn augment_counts_and_keeps_layout() {
    let c = Corpora::new();
    let out = c.path("aug");
    let v = json(&fmd(&["--json", "augment", "--target", "velocity", "--p", "1", "--sigma", "10", s(&c.path("test")), s(&out)]));
    assert_eq!(v["result"]["files"], 40);
    assert_eq!(v["result"]["notes_total"], v["result"]["notes_modified"]);
    assert!(out.join("song_00039.mid").is_file());
    let score = json(&fmd(&["--json", "score", "--ref", s(&c.path("test")), "--test", s(&out)]));
    assert_eq!(score["result"]["value"].as_f64(), Some(0.0));
}

#[test]
fn threads_from_environment() {
    let c = Corpora::new();
    let (r, t) = (c.path("ref"), c.path("test"));
    let args = ["--json", "score", "--ref", s(&r), "--test", s(&t)];
    let one = Command::new(env!("CARGO_BIN_EXE_fmd")).args(args).env("FMD_THREADS", "1").output().unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_fmd")).args(args).env("FMD_THREADS", "4").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("d2.fmdemb"), "FMDEMB 1 2\na\t0 0\nb\t1 1\nc\t0 2\n").unwrap();
    std::fs::write(p("d3.fmdemb"), "FMDEMB 1 3\na\t0 0 0\nb\t1 1 1\nc\t0 2 1\n").unwrap();
    std::fs::write(p("huge.fmdemb"), "FMDEMB 1 2\na\t1e200 0\nb\t-1e200 1\nc\t0 2\n").unwrap();
    std::fs::write(p("bad.fmdemb"), "FMDEMB 1 2\na\t0 NaN\n").unwrap();
    std::fs::write(p("v9.mtf"), "MTF v9 division=96 format=1\n").unwrap();
    std::fs::create_dir(p("junk")).unwrap();
    std::fs::write(p("junk").join("x.mid"), b"not a midi file").unwrap();

    let score = |r: &str, t: &str| code(&fmd(&["score", "--ref-emb", s(&p(r)), "--test-emb", s(&p(t))]));
    assert_eq!(score("d2.fmdemb", "d2.fmdemb"), 0);
    assert_eq!(score("missing.fmdemb", "d2.fmdemb"), 1);
    assert_eq!(score("d2.fmdemb", "d3.fmdemb"), 2);
    assert_eq!(score("bad.fmdemb", "d2.fmdemb"), 2);
    assert_eq!(score("huge.fmdemb", "d2.fmdemb"), 3);
    assert_eq!(code(&fmd(&["convert", "--to", "midi", s(&p("v9.mtf")), s(&p("o.mid"))])), 2);
    assert_eq!(code(&fmd(&["convert", "--to", "mtf", s(&p("nothing.mid")), s(&p("o.mtf"))])), 1);
    assert_eq!(code(&fmd(&["embed", s(&p("junk")), "--out", s(&p("o.fmdemb"))])), 2);
    assert_eq!(code(&fmd(&["score", "--ref-emb", s(&p("d2.fmdemb")), "--test-emb", s(&p("d2.fmdemb")), "--estimator", "bogus"])), 2);
    assert_eq!(code(&fmd(&["persong", "--ref-emb", s(&p("d2.fmdemb")), "--test-emb", s(&p("d2.fmdemb")), "--percentile", "0"])), 2);
    assert_eq!(code(&fmd(&["extrapolate", "--ref-emb", s(&p("d2.fmdemb")), "--test-emb", s(&p("d2.fmdemb"))])), 2);
    assert_eq!(code(&fmd(&["augment", "--target", "pitch", "--p", "2", "--sigma", "1", s(dir.path()), s(&p("aug"))])), 2);

    let err = fmd(&["score", "--ref-emb", s(&p("d2.fmdemb")), "--test-emb", s(&p("d3.fmdemb"))]);
    assert!(err.stdout.is_empty());
    assert!(String::from_utf8_lossy(&err.stderr).contains("error:"));
}
