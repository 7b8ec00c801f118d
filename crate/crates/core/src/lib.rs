//! Grammar-aware sequence alignment for neural architecture derivation trees.
//!
//! Trees from an einspace-style grammar are serialised into bracketed token
//! sequences and aligned with a constrained Smith-Waterman dynamic programme.
//! The aligned edit path gives both a distance between architectures and a
//! menu of grammar-valid edit operations from which hybrid offspring are built.
//! The recursive variant quotients out the branch order of two-way branching
//! modules, giving a distance on functional equivalence classes.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, timing and the
//! command line live in the companion `cswx` crate.

#![no_std]
#![allow(clippy::too_many_arguments)]

extern crate alloc;

pub mod analysis;
pub mod crossover;
pub mod cswx;
mod error;
pub mod grammar;
pub mod math;
pub mod oracle;
pub mod rcswx;
pub mod scoring;
pub mod search;
pub mod serialise;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use grammar::{DerivationTree, GrammarConfig};
pub use scoring::ScoringMatrix;
pub use serialise::{serialise, SerialisedSequence, Token};

/// Alignment flavour: plain ordered alignment or branch-permutation invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Cswx,
    Rcswx,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cswx => "cswx",
            Method::Rcswx => "rcswx",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cswx" => Ok(Method::Cswx),
            "rcswx" => Ok(Method::Rcswx),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown method `{other}` (expected cswx or rcswx)"
            ))),
        }
    }
}

/// Distance between two trees under `method`.
pub fn distance(
    a: &DerivationTree,
    b: &DerivationTree,
    method: Method,
    scoring: &ScoringMatrix,
) -> Result<f64> {
    match method {
        Method::Cswx => cswx::cswx_distance(a, b, scoring),
        Method::Rcswx => rcswx::rcswx_distance(a, b, scoring),
    }
}
