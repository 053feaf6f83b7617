//! The query language programs are written in: a small, closed,
//! Python-flavoured imperative language. Programs can only reach the scene
//! through the builtin table, and every run is bounded by step, API-call and
//! output budgets.

pub mod ast;
mod interp;
mod lexer;
mod parser;
mod unparse;
pub mod value;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ast::Program;
pub use interp::{execute, BUILTINS};
pub use parser::parse;
pub use unparse::unparse;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("SyntaxError at line {line}, column {col}: {reason}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_steps: u64,
    pub max_api_calls: u64,
    pub max_stdout_bytes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 10_000, max_api_calls: 200, max_stdout_bytes: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NameError,
    UnknownBuiltin,
    ArityError,
    TypeError,
    ValueError,
    IndexError,
    ZeroDivisionError,
    /// A scene API failure, named by `ApiError::kind`.
    Api(&'static str),
    StepLimitExceeded,
    ApiCallLimitExceeded,
    OutputTruncated,
}

impl ErrorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorKind::NameError => "NameError",
            ErrorKind::UnknownBuiltin => "UnknownBuiltin",
            ErrorKind::ArityError => "ArityError",
            ErrorKind::TypeError => "TypeError",
            ErrorKind::ValueError => "ValueError",
            ErrorKind::IndexError => "IndexError",
            ErrorKind::ZeroDivisionError => "ZeroDivisionError",
            ErrorKind::Api(k) => k,
            ErrorKind::StepLimitExceeded => "StepLimitExceeded",
            ErrorKind::ApiCallLimitExceeded => "ApiCallLimitExceeded",
            ErrorKind::OutputTruncated => "OutputTruncated",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecError {
    pub kind: ErrorKind,
    pub message: String,
    pub line: usize,
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at line {}: {}", self.kind, self.line, self.message)
    }
}

impl std::error::Error for ExecError {}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionOutcome {
    pub stdout: String,
    pub steps: u64,
    pub api_calls: u64,
    pub error: Option<ExecError>,
}

impl ExecutionOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}
