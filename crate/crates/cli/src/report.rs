//! JSON report envelope shared by every command.
//!
//! ```json
//! {
//!   "schema": "fmd-report/1",
//!   "tool_version": "0.1.0",
//!   "command": "score",
//!   "config": { "command": { "score": { ... } }, "log_level": "warn", ... },
//!   "seed": 0,
//!   "estimator": { "estimator": "mle", ... },
//!   "embedder": { "kind": "builtin_features", ... },
//!   "n_ref": 120,
//!   "n_test": 80,
//!   "diagnostics": { ... },
//!   "result": { ... }
//! }
//! ```
//!
//! Fields that do not apply to a command are `null`. Thread count is left
//! out of the config echo because it never changes results.

use std::path::PathBuf;

use anyhow::{Context, Result};
use fmd_core::embed::EmbedderSpec;
use fmd_core::stats::EstimatorConfig;
use serde::Serialize;
use serde_json::Value;

use crate::{Cli, Command};

pub const SCHEMA: &str = "fmd-report/1";

#[derive(Serialize)]
pub struct RunConfig<'a> {
    pub command: &'a Command,
    pub json: bool,
    pub log_level: &'a str,
    pub report: Option<&'a PathBuf>,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub config: RunConfig<'a>,
    pub seed: Option<u64>,
    pub estimator: Option<EstimatorConfig>,
    pub embedder: Option<EmbedderSpec>,
    pub n_ref: Option<usize>,
    pub n_test: Option<usize>,
    pub diagnostics: Value,
    pub result: Value,
}

impl<'a> Report<'a> {
    pub fn new(cli: &'a Cli, command: &'static str, result: impl Serialize) -> Result<Self> {
        Ok(Report {
            schema: SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config: RunConfig { command: &cli.command, json: cli.json, log_level: &cli.log_level, report: cli.report.as_ref() },
            seed: None,
            estimator: None,
            embedder: None,
            n_ref: None,
            n_test: None,
            diagnostics: Value::Object(Default::default()),
            result: serde_json::to_value(result).context("serializing result")?,
        })
    }

    /// Prints the report (JSON or `human`) and writes `--report` if given.
    pub fn emit(&self, cli: &Cli, human: impl FnOnce() -> String) -> Result<()> {
        let json = serde_json::to_string_pretty(self).context("serializing report")?;
        if let Some(path) = &cli.report {
            std::fs::write(path, format!("{json}\n")).with_context(|| format!("writing report {}", path.display()))?;
        }
        if cli.json {
            println!("{json}");
        } else {
            print!("{}", human());
        }
        Ok(())
    }
}
