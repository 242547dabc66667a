//! Parsing of the STRIPS + `:typing` subset of PDDL.
//!
//! Symbols are folded to lower case and `;` comments are dropped before
//! tokenizing. Anything outside the subset (negative preconditions,
//! conditional effects, quantifiers, equality, numeric fluents, ...) is
//! rejected with an error naming the construct.

mod ast;
mod compat;
mod parse;
mod print;
mod sexpr;

use std::fmt;

pub use ast::*;
pub use compat::{check_compat, Diagnostic};
pub use parse::{parse_domain, parse_problem};
pub use print::{domain_to_string, problem_to_string};
pub use sexpr::Pos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PddlErrorKind {
    Syntax(String),
    Unsupported(String),
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlError {
    pub file: Option<String>,
    pub pos: Pos,
    pub kind: PddlErrorKind,
}

impl PddlError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            file: None,
            pos,
            kind: PddlErrorKind::Syntax(message.into()),
        }
    }

    pub(crate) fn unsupported(pos: Pos, construct: impl Into<String>) -> Self {
        Self {
            file: None,
            pos,
            kind: PddlErrorKind::Unsupported(construct.into()),
        }
    }

    pub(crate) fn invalid(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            file: None,
            pos,
            kind: PddlErrorKind::Invalid(message.into()),
        }
    }

    pub fn pos(&self) -> Option<Pos> {
        Some(self.pos)
    }

    /// Attaches the source file name used in the rendered diagnostic.
    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }

    pub fn is_unsupported(&self) -> bool {
        matches!(self.kind, PddlErrorKind::Unsupported(_))
    }
}

impl fmt::Display for PddlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}: ", self.pos)?;
        match &self.kind {
            PddlErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            PddlErrorKind::Unsupported(c) => write!(f, "unsupported construct: {c}"),
            PddlErrorKind::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for PddlError {}
