//! Command-line front end for qpmkit.
//!
//! Every subcommand reads UTF-8 JSON documents and writes one [`RunReport`]
//! to stdout. Exit codes: 0 on success, 1 on a validation or precondition
//! error (including a hull target rejected by the norm prefilter), 2 when
//! hull membership is inconclusive. `QPMKIT_TOL` overrides the default
//! validation tolerance `1e-9`.

pub mod args;
mod commands;
pub mod coverage;
pub mod report;
pub mod suite;

use std::ffi::OsString;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use qpmkit::matkit::DEFAULT_TOL;
use serde_json::{json, Value};

pub use args::{Cli, Command};
pub use report::{ErrorObject, Inputs, Outcome, RunReport, Status};

/// Environment variable overriding the validation tolerance.
pub const TOL_ENV: &str = "QPMKIT_TOL";

/// Result of [`run`]: either a report, or text clap produced for `--help` / `--version`.
#[derive(Debug)]
pub enum Run {
    Report { code: i32, report: Box<RunReport> },
    Text(String),
}

impl Run {
    pub fn code(&self) -> i32 {
        match self {
            Run::Report { code, .. } => *code,
            Run::Text(_) => 0,
        }
    }
}

/// Validation tolerance from `QPMKIT_TOL`, or the default.
pub fn tolerance_from_env(value: Option<&str>) -> Result<f64, ErrorObject> {
    match value {
        None => Ok(DEFAULT_TOL),
        Some(s) => match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
            _ => Err(ErrorObject::new("MalformedInput", format!("{TOL_ENV}={s:?} is not a non-negative number"))),
        },
    }
}

fn failure(command: &str, start: Instant, error: ErrorObject) -> Run {
    let report = RunReport {
        command: command.to_string(),
        inputs_digest: String::new(),
        outputs: Value::Null,
        diagnostics: json!({}),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        error: Some(error),
    };
    Run::Report { code: 1, report: Box::new(report) }
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// `tol_env` is the value of `QPMKIT_TOL`, if set.
pub fn run<I, T>(argv: I, tol_env: Option<&str>) -> Run
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let start = Instant::now();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    Run::Text(e.render().to_string())
                }
                ErrorKind::InvalidSubcommand => failure("", start, ErrorObject::new("UnknownCommand", e.render().to_string())),
                _ => failure("", start, ErrorObject::new("UsageError", e.render().to_string())),
            };
        }
    };
    let name = cli.command.name();
    let tol = match tolerance_from_env(tol_env) {
        Ok(t) => t,
        Err(e) => return failure(&name, start, e),
    };
    log::info!("{name}: start (tol {tol:e})");
    let mut inputs = Inputs::new(&name, tol);
    let outcome = commands::execute(&cli.command, &mut inputs);
    let digest = inputs.digest();
    let outcome = outcome.unwrap_or_else(|e| Outcome { status: Status::Failed(e), outputs: Value::Null, diagnostics: json!({}) });
    let code = outcome.status.exit_code();
    let error = match outcome.status {
        Status::Failed(e) => {
            log::warn!("{name}: {}: {}", e.kind, e.message);
            Some(e)
        }
        _ => None,
    };
    let report = RunReport {
        command: name,
        inputs_digest: digest,
        outputs: outcome.outputs,
        diagnostics: outcome.diagnostics,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        error,
    };
    log::info!("{}: exit {code} after {:.1} ms", report.command, report.wall_time_ms);
    Run::Report { code, report: Box::new(report) }
}
