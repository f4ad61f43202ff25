//! Document formats: the native JSON document and UAI `MARKOV` text.

mod native;
mod uai;

use thiserror::Error;

use crate::scheme::ValidationReport;

pub use native::{parse_native, parse_native_graph, NativeDocument, NativeFactor, NativeMode, NativeVariable};
pub use uai::{parse_uai, write_uai, UaiGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error at byte {offset}: {message}")]
    Truncated { offset: usize, message: String },
    #[error("unsupported preamble {0:?}")]
    UnsupportedPreamble(String),
    #[error("invalid graph: {0}")]
    Validation(ValidationReport),
    #[error("bad value at {at}: {message}")]
    Value { at: String, message: String },
    #[error("cannot express in this format: {0}")]
    NotRepresentable(String),
}
