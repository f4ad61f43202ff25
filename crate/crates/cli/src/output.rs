use std::fs;
use std::io::Write;
use std::path::PathBuf;

use semibp::algebra::Semiring;
use semibp::engine::Residual;
use semibp::tensor::Message;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefEntry {
    pub id: usize,
    pub values: Vec<Json>,
}

/// The envelope written by `run`, `exact`, `jtree` and `map`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefsDocument {
    pub converged: bool,
    pub iterations: usize,
    /// Largest message change of the last sweep; `null` when unbounded.
    pub residual: Json,
    pub semiring: &'static str,
    pub beliefs: Vec<BeliefEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_value: Option<Json>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<usize>>,
}

impl BeliefsDocument {
    pub fn new<S: Semiring>(converged: bool, iterations: usize, residual: Residual, beliefs: &[Message<S::Value>]) -> Self {
        Self {
            converged,
            iterations,
            residual: residual_json(residual),
            semiring: S::NAME,
            beliefs: beliefs
                .iter()
                .enumerate()
                .map(|(id, m)| BeliefEntry {
                    id,
                    values: m.values.iter().map(S::to_json).collect(),
                })
                .collect(),
            contraction_value: None,
            assignment: None,
        }
    }
}

pub fn residual_json(r: Residual) -> Json {
    match r {
        Residual::Numeric(x) => serde_json::Number::from_f64(x).map_or(Json::Null, Json::Number),
        Residual::Exact { changed: false } => json!(0),
        Residual::Exact { changed: true } => Json::Null,
    }
}

pub fn to_text<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Write a document to `--output` or standard output.
pub fn emit(target: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match target {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            message: e.to_string(),
        }),
    }
}

/// One JSON object per line on the error stream.
pub fn diagnostic(stderr: &mut dyn Write, level: &str, code: u8, kind: &str, message: &str) {
    let record = json!({ "level": level, "code": code, "kind": kind, "message": message });
    let _ = writeln!(stderr, "{record}");
}
