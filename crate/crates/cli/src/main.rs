use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmd_core::augment::AugmentTarget;
use fmd_core::embed::{EmbedderSpec, InputFormat};
use fmd_core::stats::{Estimator, EstimatorConfig, DEFAULT_BOOTSTRAP_B, DEFAULT_SHRINKAGE_ALPHA};
use serde::Serialize;

mod commands;
mod exit;
mod report;

#[derive(Parser, Debug)]
#[command(name = "fmd", version, about = "Frechet Music Distance for MIDI and ABC corpora")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "FMD_THREADS")]
    threads: Option<usize>,

    /// Print exactly one JSON document on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[arg(long, global = true, default_value = "warn", value_parser = ["off", "error", "warn", "info", "debug", "trace"])]
    log_level: String,

    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Embed a corpus into an FMDEMB file.
    Embed(EmbedArgs),
    /// FMD between a reference and a test corpus.
    Score(ScoreArgs),
    /// Per-song FMD of test songs against the reference, with a bottom-percentile selection.
    Persong(PersongArgs),
    /// FMD extrapolated to an infinite test set.
    Extrapolate(ExtrapolateArgs),
    /// Convert between MIDI and MTF text.
    Convert(ConvertArgs),
    /// Strip leading whitespace and add missing voice fields in ABC tunebooks.
    CleanAbc(CleanAbcArgs),
    /// Write a noise-augmented copy of a MIDI corpus.
    Augment(AugmentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EmbedderChoice {
    /// 48 symbolic features, velocity ignored.
    Builtin,
    /// Builtin features plus velocity mean and std (50 dims).
    BuiltinVelocity,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EmbedderArgs {
    #[arg(long, value_enum, default_value = "builtin")]
    embedder: EmbedderChoice,

    /// Scale each embedding to unit L2 norm.
    #[arg(long)]
    normalize: bool,
}

impl EmbedderArgs {
    fn spec(&self) -> EmbedderSpec {
        EmbedderSpec {
            include_velocity: self.embedder == EmbedderChoice::BuiltinVelocity,
            normalize: self.normalize,
            ..EmbedderSpec::builtin()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EstimatorChoice {
    Mle,
    Bootstrap,
    Shrinkage,
    LedoitWolf,
    Oas,
}

impl From<EstimatorChoice> for Estimator {
    fn from(c: EstimatorChoice) -> Self {
        match c {
            EstimatorChoice::Mle => Estimator::Mle,
            EstimatorChoice::Bootstrap => Estimator::Bootstrap,
            EstimatorChoice::Shrinkage => Estimator::BasicShrinkage,
            EstimatorChoice::LedoitWolf => Estimator::LedoitWolf,
            EstimatorChoice::Oas => Estimator::Oas,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct EstimatorArgs {
    #[arg(long, value_enum, default_value = "mle")]
    estimator: EstimatorChoice,

    #[arg(long, default_value_t = DEFAULT_SHRINKAGE_ALPHA)]
    shrinkage_alpha: f64,

    #[arg(long = "bootstrap-B", default_value_t = DEFAULT_BOOTSTRAP_B)]
    bootstrap_b: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EstimatorArgs {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            estimator: self.estimator.into(),
            shrinkage_alpha: self.shrinkage_alpha,
            bootstrap_b: self.bootstrap_b,
            seed: self.seed,
        }
    }
}

/// Reference and test corpora: directories, song files, or one FMDEMB file each.
#[derive(Args, Debug, Clone, Serialize)]
struct CorpusPair {
    /// Reference corpus: directories or song files.
    #[arg(long = "ref", required_unless_present = "ref_emb", num_args = 1.., conflicts_with = "ref_emb")]
    reference: Vec<PathBuf>,

    /// Test corpus: directories or song files.
    #[arg(long, required_unless_present = "test_emb", num_args = 1.., conflicts_with = "test_emb")]
    test: Vec<PathBuf>,

    /// Precomputed reference embeddings (FMDEMB).
    #[arg(long)]
    ref_emb: Option<PathBuf>,

    /// Precomputed test embeddings (FMDEMB).
    #[arg(long)]
    test_emb: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EmbedArgs {
    /// Directories or song files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,

    #[arg(long)]
    out: PathBuf,

    #[command(flatten)]
    embedder: EmbedderArgs,

    /// Only embed files of this format.
    #[arg(long, value_enum)]
    format: Option<FormatChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormatChoice {
    Midi,
    Abc,
}

impl From<FormatChoice> for InputFormat {
    fn from(c: FormatChoice) -> Self {
        match c {
            FormatChoice::Midi => InputFormat::Midi,
            FormatChoice::Abc => InputFormat::Abc,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct ScoreArgs {
    #[command(flatten)]
    corpora: CorpusPair,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct PersongArgs {
    #[command(flatten)]
    corpora: CorpusPair,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,

    /// Select songs at or below this nearest-rank percentile of per-song FMD.
    #[arg(long, default_value_t = 5.0)]
    percentile: f64,

    /// Copy the source files of selected songs into this directory.
    #[arg(long)]
    copy_to: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ExtrapolateArgs {
    #[command(flatten)]
    corpora: CorpusPair,
    #[command(flatten)]
    embedder: EmbedderArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,

    #[arg(long, default_value_t = fmd_core::frechet::DEFAULT_POINTS)]
    points: usize,

    /// Smallest subset size [default: max(50, dim + 2)].
    #[arg(long)]
    n_min: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConvertTarget {
    Mtf,
    Midi,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    to: ConvertTarget,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CleanAbcArgs {
    /// ABC tunebook; the cleaned tunes are written to `output` as one tunebook.
    input: PathBuf,
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TargetChoice {
    Pitch,
    Velocity,
}

#[derive(Args, Debug, Clone, Serialize)]
struct AugmentArgs {
    #[arg(long, value_enum)]
    target: TargetChoice,

    /// Probability that a note is modified.
    #[arg(long)]
    p: f64,

    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,

    #[arg(long)]
    sigma: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    in_dir: PathBuf,
    out_dir: PathBuf,
}

impl From<TargetChoice> for AugmentTarget {
    fn from(c: TargetChoice) -> Self {
        match c {
            TargetChoice::Pitch => AugmentTarget::Pitch,
            TargetChoice::Velocity => AugmentTarget::Velocity,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(exit::INVALID_INPUT);
        }
    };

    match pool.install(|| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::code_for(&err))
        }
    }
}
