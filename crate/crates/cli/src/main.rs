use std::io::Write;
use std::process::ExitCode;

use qpmkit_cli::{run, Run, TOL_ENV};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).target(env_logger::Target::Stderr).init();
    let tol = std::env::var(TOL_ENV).ok();
    let result = run(std::env::args_os(), tol.as_deref());
    let code = result.code();
    let mut out = std::io::stdout().lock();
    let written = match result {
        Run::Text(text) => write!(out, "{text}"),
        Run::Report { report, .. } => match serde_json::to_string_pretty(&report) {
            Ok(json) => writeln!(out, "{json}"),
            Err(e) => {
                eprintln!("cannot serialize report: {e}");
                return ExitCode::FAILURE;
            }
        },
    };
    if written.is_err() {
        return ExitCode::FAILURE;
    }
    ExitCode::from(code as u8)
}
