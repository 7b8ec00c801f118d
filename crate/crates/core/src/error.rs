use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::grammar::Violation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    Arity {
        op: String,
        expected: usize,
        found: usize,
    },
    UnknownOp {
        category: &'static str,
        name: String,
    },
    Invalid(Vec<Violation>),
}

/// A tree text that could not be turned into a valid derivation tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::Arity {
                op,
                expected,
                found,
            } => write!(
                f,
                "arity mismatch for `{op}`: expected {expected} hyperparameters, found {found}"
            ),
            ParseErrorKind::UnknownOp { category, name } => {
                write!(f, "unknown {category} operation `{name}`")
            }
            ParseErrorKind::Invalid(v) => {
                write!(f, "invalid tree:")?;
                for violation in v {
                    write!(f, " {violation};")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.kind)
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid tree: {0:?}")]
    InvalidTree(Vec<Violation>),
    #[error("malformed token sequence: {0}")]
    Malformed(String),
    #[error("no finite-cost grammar-valid alignment exists; review the scoring matrix")]
    Unalignable,
    #[error("trees {i} and {j} cannot be aligned; review the scoring matrix")]
    UnalignablePair { i: usize, j: usize },
    #[error("no common non-terminals")]
    NoCommonNonterminals,
    #[error("{what} too large: {actual} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("fit did not converge; best residual {residual}")]
    NoConvergence { residual: f64 },
    #[error("search aborted before completion")]
    Aborted,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal consistency violation: {0}")]
    Internal(String),
}
