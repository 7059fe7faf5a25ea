//! Configuration, orchestration and file formats for the `ekp` binary.
//!
//! Exit codes: 0 success, 2 validation failure, 3 numerical abort (vacuum
//! or instability). Every run that gets as far as an output directory
//! leaves a JSON report with a `status` of `ok`, `invalid` or `aborted`.

pub mod config;
pub mod experiment;
pub mod fieldseries;
pub mod output;
pub mod scenarios;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::Config;
use crate::experiment::{ExperimentConfig, Scenario};
use crate::output::write_json;
use crate::scenarios::{run_settings, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Clone, Debug)]
pub struct Invocation {
    pub scenario: String,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: Option<String>,
}

impl Outcome {
    fn invalid(message: impl Into<String>) -> Self {
        Outcome {
            code: EXIT_INVALID,
            message: Some(message.into()),
        }
    }
}

/// Parses and validates the scenario and its configuration.
pub fn prepare(inv: &Invocation) -> Result<ExperimentConfig, String> {
    let scenario: Scenario = inv.scenario.parse().map_err(|e: config::ConfigError| e.to_string())?;
    let cfg = Config::load(&inv.config).map_err(|e| e.to_string())?;
    ExperimentConfig::build(scenario, cfg, inv.seed).map_err(|e| format!("{}: {e}", inv.config.display()))
}

fn report_envelope(inv: &Invocation, seed: Option<u64>, status: &str, error: Option<&str>, result: Value) -> Value {
    json!({
        "scenario": inv.scenario,
        "config": inv.config.display().to_string(),
        "seed": seed,
        "status": status,
        "error": error,
        "result": result,
    })
}

fn write_artifacts(
    exp: &ExperimentConfig,
    out: &Path,
    artifacts: &scenarios::Artifacts,
) -> std::io::Result<()> {
    artifacts.table.write(exp.scenario.name(), &out.join(&exp.outputs.csv))?;
    if let (Some(name), Some(series)) = (&exp.outputs.series, &artifacts.series) {
        series.write(&out.join(name)).map_err(std::io::Error::other)?;
    }
    Ok(())
}

/// Runs one scenario end to end and writes its artifacts.
pub fn execute(inv: &Invocation) -> Outcome {
    let out = inv.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let exp = match prepare(inv) {
        Ok(exp) => exp,
        Err(message) => {
            // a report is still left behind when the directory is usable
            if std::fs::create_dir_all(&out).is_ok() {
                let report = report_envelope(inv, inv.seed, "invalid", Some(&message), Value::Null);
                let _ = write_json(&report, &out.join("report.json"));
            }
            return Outcome::invalid(message);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&out) {
        return Outcome::invalid(format!("cannot create {}: {e}", out.display()));
    }
    let report_path = out.join(&exp.outputs.report);
    let result = run_settings(&exp.settings, exp.outputs.series.is_some());
    let (code, status, message, body) = match result {
        Ok(artifacts) => {
            if let Err(e) = write_artifacts(&exp, &out, &artifacts) {
                return Outcome::invalid(format!("writing artifacts to {}: {e}", out.display()));
            }
            match &artifacts.abort {
                Some(reason) => (EXIT_ABORT, "aborted", Some(reason.clone()), artifacts.report),
                None => (EXIT_OK, "ok", None, artifacts.report),
            }
        }
        Err(RunError::Invalid(m)) => (EXIT_INVALID, "invalid", Some(m), Value::Null),
        Err(RunError::Numerical(m)) => (EXIT_ABORT, "aborted", Some(m), Value::Null),
    };
    let report = report_envelope(inv, Some(exp.seed), status, message.as_deref(), body);
    if let Err(e) = write_json(&report, &report_path) {
        return Outcome::invalid(format!("writing {}: {e}", report_path.display()));
    }
    Outcome { code, message }
}

/// Caps the global rayon pool from `EKP_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), String> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("EKP_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("EKP_THREADS: {e}"))
}
