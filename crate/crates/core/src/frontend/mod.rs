//! Text front end: `.lit` source to a validated [`Program`].
//!
//! Statements touching several globals are split so that every node reads
//! or writes at most one global; conditions over globals are preceded by
//! loads into fresh `__t<N>` locals. `lock`/`unlock` become plain fences:
//! mutual exclusion itself is not modeled, which only adds interleavings.

pub mod ast;
mod lower;
mod parser;

use thiserror::Error;

pub use ast::{SourceProgram, Span};
pub use lower::{lower, EPILOGUE_THREAD, ROOT_THREAD};
pub use parser::parse;

use crate::ir::{validate, Program};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{span}: syntax error: found {found}, expected {}", expected.join(" or "))]
    Syntax { span: Span, found: String, expected: Vec<String> },
    #[error("{span}: duplicate declaration of `{name}`")]
    Duplicate { name: String, span: Span },
    #[error("{span}: use of undeclared identifier `{name}`")]
    Undeclared { name: String, span: Span },
    #[error("{span}: `{name}` is a local of thread t{owner}")]
    ForeignLocal { name: String, owner: u32, span: Span },
    #[error("{span}: unknown thread `{name}`")]
    UnknownThread { name: String, span: Span },
    #[error("lowered program is malformed: {0}")]
    Invalid(String),
}

impl FrontendError {
    pub fn span(&self) -> Option<Span> {
        match self {
            FrontendError::Syntax { span, .. }
            | FrontendError::Duplicate { span, .. }
            | FrontendError::Undeclared { span, .. }
            | FrontendError::ForeignLocal { span, .. }
            | FrontendError::UnknownThread { span, .. } => Some(*span),
            FrontendError::Invalid(_) => None,
        }
    }
}

/// Parses, lowers and validates `.lit` source.
pub fn compile(text: &str) -> Result<Program, FrontendError> {
    let program = lower(&parse(text)?)?;
    let diags = validate(&program);
    if let Some(d) = diags.first() {
        return Err(FrontendError::Invalid(d.to_string()));
    }
    Ok(program)
}
