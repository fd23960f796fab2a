//! Run reports, error objects and input digests.

use std::fmt::Display;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Machine-readable error attached to a failed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// JSON pointer into `file`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
}

impl ErrorObject {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        ErrorObject { kind: kind.to_string(), message: message.into(), file: None, pointer: None }
    }

    /// Maps a library error; `file` names the document being read, if any.
    pub fn from_core(e: &qpmkit::Error, file: Option<&str>) -> Self {
        let debug = format!("{e:?}");
        let kind = debug.split([' ', '(', '{']).next().unwrap_or("Error").to_string();
        let pointer = match e {
            qpmkit::Error::MalformedInput { pointer, .. } => Some(pointer.clone()),
            _ => None,
        };
        let message = match e {
            qpmkit::Error::MalformedInput { message, .. } => message.clone(),
            other => other.to_string(),
        };
        ErrorObject { kind, message, file: file.map(str::to_string), pointer }
    }
}

impl From<qpmkit::Error> for ErrorObject {
    fn from(e: qpmkit::Error) -> Self {
        ErrorObject::from_core(&e, None)
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Failed(ErrorObject),
    /// Hull membership neither certified nor rejected.
    Inconclusive,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed(_) => 1,
            Status::Inconclusive => 2,
        }
    }
}

/// What a subcommand hands back before the report is assembled.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub outputs: Value,
    pub diagnostics: Value,
}

impl Outcome {
    pub fn ok(outputs: Value, diagnostics: Value) -> Self {
        Outcome { status: Status::Ok, outputs, diagnostics }
    }
}

/// The JSON document written to stdout for every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 over the command, its parameters and the input documents.
    pub inputs_digest: String,
    pub outputs: Value,
    pub diagnostics: Value,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorObject>,
}

/// Reads input documents and accumulates the inputs digest.
pub struct Inputs {
    hasher: Sha256,
    /// Validation tolerance for measures and states.
    pub tol: f64,
}

impl Inputs {
    pub fn new(command: &str, tol: f64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"command=");
        hasher.update(command.as_bytes());
        hasher.update(b"\n");
        hasher.update(format!("tol={tol:e}\n").as_bytes());
        Inputs { hasher, tol }
    }

    /// Records a parameter that influences the outputs.
    pub fn param(&mut self, key: &str, value: impl Display) {
        self.hasher.update(format!("{key}={value}\n").as_bytes());
    }

    /// Reads and parses a JSON document; its bytes enter the digest.
    pub fn read(&mut self, path: &Path) -> Result<Value, ErrorObject> {
        let name = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|e| ErrorObject {
            file: Some(name.clone()),
            ..ErrorObject::new("Io", format!("cannot read {name}: {e}"))
        })?;
        self.hasher.update(format!("file:{}\n", bytes.len()).as_bytes());
        self.hasher.update(&bytes);
        let text = String::from_utf8(bytes).map_err(|_| ErrorObject {
            file: Some(name.clone()),
            pointer: Some(String::new()),
            ..ErrorObject::new("MalformedInput", "document is not UTF-8")
        })?;
        qpmkit::io::parse_document(&text).map_err(|e| ErrorObject::from_core(&e, Some(&name)))
    }

    /// Reads a document and converts it with `parse`, attributing errors to the file.
    pub fn load<T>(&mut self, path: &Path, parse: impl FnOnce(&Value, f64) -> qpmkit::Result<T>) -> Result<T, ErrorObject> {
        let v = self.read(path)?;
        let tol = self.tol;
        parse(&v, tol).map_err(|e| ErrorObject::from_core(&e, Some(&path.display().to_string())))
    }

    pub fn digest(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kind_is_the_variant_name() {
        let e = qpmkit::Error::NotPsd { min_eigenvalue: -1.0 };
        assert_eq!(ErrorObject::from_core(&e, None).kind, "NotPsd");
        let e = qpmkit::Error::InvalidState("x".into());
        assert_eq!(ErrorObject::from_core(&e, None).kind, "InvalidState");
        let e = qpmkit::Error::NonFinite;
        assert_eq!(ErrorObject::from_core(&e, None).kind, "NonFinite");
    }

    #[test]
    fn malformed_input_keeps_pointer() {
        let e = qpmkit::Error::MalformedInput { pointer: "/outcomes/1/effect".into(), message: "bad".into() };
        let o = ErrorObject::from_core(&e, Some("povm.json"));
        assert_eq!(o.pointer.as_deref(), Some("/outcomes/1/effect"));
        assert_eq!(o.file.as_deref(), Some("povm.json"));
        assert_eq!(o.message, "bad");
    }

    #[test]
    fn digest_depends_on_parameters() {
        let mut a = Inputs::new("noise", 1e-9);
        a.param("seed", 1);
        let mut b = Inputs::new("noise", 1e-9);
        b.param("seed", 2);
        let mut c = Inputs::new("noise", 1e-9);
        c.param("seed", 1);
        let (a, b, c) = (a.digest(), b.digest(), c.digest());
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Ok.exit_code(), 0);
        assert_eq!(Status::Failed(ErrorObject::new("X", "y")).exit_code(), 1);
        assert_eq!(Status::Inconclusive.exit_code(), 2);
    }
}
