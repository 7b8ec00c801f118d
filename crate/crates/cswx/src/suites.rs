//! Oracle agreement suites: random tree pairs checked against the slow
//! reference implementations.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use cswx_core::cswx::cswx_distance;
use cswx_core::grammar::{sample_tree, GrammarConfig};
use cswx_core::oracle::{
    brute_force_permutation_distance, exhaustive_edit_distance, ged_sepx_path_with_abort, GraphEditPath,
    SmallGraph, MAX_EXHAUSTIVE_TOKENS, MAX_GED_NODES,
};
use cswx_core::rcswx::rcswx_distance;
use cswx_core::{serialise, DerivationTree, Error, Result, ScoringMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default time budget of one GED computation.
pub const DEFAULT_GED_TIMEOUT: Duration = Duration::from_secs(120);

/// Exact GED, giving up with [`Error::Aborted`] after `timeout`.
pub fn ged_with_timeout(
    g1: &SmallGraph,
    g2: &SmallGraph,
    m: &ScoringMatrix,
    timeout: Duration,
) -> Result<GraphEditPath> {
    let start = Instant::now();
    ged_sepx_path_with_abort(g1, g2, m, &|| start.elapsed() > timeout)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Plain alignment against exhaustive script search.
    Dp,
    /// Invariant alignment against enumeration of branch swaps.
    Perm,
    /// Invariant alignment against exact graph edit distance.
    Ged,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Dp => "dp",
            Suite::Perm => "perm",
            Suite::Ged => "ged",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(Suite::Dp),
            "perm" => Ok(Suite::Perm),
            "ged" => Ok(Suite::Ged),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite `{other}` (expected dp, perm or ged)"
            ))),
        }
    }
}

/// Largest combined two-way branching count of a `perm` pair.
pub const PERM_MAX_BRANCHES: usize = 4;

/// Seeded pairs within the size limits of `suite`'s oracle.
pub fn suite_pairs(suite: Suite, n: usize, seed: u64) -> Vec<(DerivationTree, DerivationTree)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = match suite {
        Suite::Dp => GrammarConfig::with_max_depth(4),
        Suite::Perm => GrammarConfig::with_max_depth(6),
        Suite::Ged => GrammarConfig::with_max_depth(6),
    };
    let admit = |a: &DerivationTree, b: &DerivationTree| match suite {
        Suite::Dp => serialise(a).len() + serialise(b).len() <= MAX_EXHAUSTIVE_TOKENS,
        Suite::Perm => {
            let k = a.branch2_count() + b.branch2_count();
            (1..=PERM_MAX_BRANCHES).contains(&k) && serialise(a).len() + serialise(b).len() <= 120
        }
        Suite::Ged => a.node_count() <= MAX_GED_NODES && b.node_count() <= MAX_GED_NODES,
    };
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = sample_tree(&config, &mut rng);
        let b = sample_tree(&config, &mut rng);
        if admit(&a, &b) {
            out.push((a, b));
        }
    }
    out
}

/// One pair's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub fast: f64,
    pub oracle: Option<f64>,
    /// Oracle error, such as a timeout.
    pub error: Option<String>,
}

impl PairCheck {
    pub fn passed(&self) -> bool {
        self.oracle == Some(self.fast)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub pairs: usize,
    pub passed: usize,
    pub failed: usize,
    /// Oracle failures (timeouts and refusals) among the failures.
    pub errors: usize,
    pub max_deviation: f64,
    pub elapsed: Duration,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite {}: {} pairs, {} passed, {} failed ({} oracle errors), max deviation {}, {:.2}s",
            self.suite,
            self.pairs,
            self.passed,
            self.failed,
            self.errors,
            self.max_deviation,
            self.elapsed.as_secs_f64()
        )
    }
}

pub fn check_pair(suite: Suite, a: &DerivationTree, b: &DerivationTree, m: &ScoringMatrix) -> Result<PairCheck> {
    let (fast, oracle) = match suite {
        Suite::Dp => (
            cswx_distance(a, b, m)?,
            exhaustive_edit_distance(&serialise(a), &serialise(b), m),
        ),
        Suite::Perm => (rcswx_distance(a, b, m)?, brute_force_permutation_distance(a, b, m)),
        Suite::Ged => {
            let g = SmallGraph::from_tree(a).and_then(|ga| {
                let gb = SmallGraph::from_tree(b)?;
                ged_with_timeout(&ga, &gb, m, DEFAULT_GED_TIMEOUT).map(|p| p.cost)
            });
            (rcswx_distance(a, b, m)?, g)
        }
    };
    Ok(match oracle {
        Ok(o) => PairCheck {
            fast,
            oracle: Some(o),
            error: None,
        },
        Err(e) => PairCheck {
            fast,
            oracle: None,
            error: Some(e.to_string()),
        },
    })
}

/// Checks `n` seeded pairs in parallel.
pub fn run_suite(suite: Suite, n: usize, seed: u64, m: &ScoringMatrix) -> Result<SuiteReport> {
    let start = Instant::now();
    let pairs = suite_pairs(suite, n, seed);
    let checks: Vec<PairCheck> = pairs
        .par_iter()
        .map(|(a, b)| check_pair(suite, a, b, m))
        .collect::<Result<_>>()?;
    let passed = checks.iter().filter(|c| c.passed()).count();
    let errors = checks.iter().filter(|c| c.error.is_some()).count();
    let max_deviation = checks
        .iter()
        .filter_map(|c| c.oracle.map(|o| (o - c.fast).abs()))
        .fold(0.0, f64::max);
    Ok(SuiteReport {
        suite,
        pairs: checks.len(),
        passed,
        failed: checks.len() - passed,
        errors,
        max_deviation,
        elapsed: start.elapsed(),
    })
}
