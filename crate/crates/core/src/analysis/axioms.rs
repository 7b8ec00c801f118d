use rand::Rng;

use crate::error::Result;
use crate::grammar::DerivationTree;
use crate::scoring::ScoringMatrix;
use crate::{distance, Method};

/// Slack allowed on the triangle inequality.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// How many samples each axiom is checked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxiomPlan {
    /// Pairs for non-negativity, identity and symmetry.
    pub pairs: usize,
    pub triples: usize,
    /// Trees compared with a random branch exchange of themselves.
    pub permutations: usize,
}

impl AxiomPlan {
    pub fn uniform(n: usize) -> Self {
        AxiomPlan {
            pairs: n,
            triples: n,
            permutations: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxiomReport {
    pub pairs: usize,
    pub triples: usize,
    pub permutations: usize,
    pub negative: usize,
    /// `d(x, x) != 0`.
    pub identity: usize,
    /// `d(x, y) != d(y, x)`, compared exactly.
    pub asymmetric: usize,
    pub triangle: usize,
    /// Most negative `d(x, y) + d(y, z) - d(x, z)` seen.
    pub worst_triangle_slack: f64,
    /// `d(x, pi(x)) > 0`. A failure only for the invariant method; for the
    /// plain method it is the expected syntactic behaviour.
    pub permutation_positive: usize,
    pub worst_permutation_distance: f64,
}

impl AxiomReport {
    /// True when no axiom of `method` is violated.
    pub fn passed(&self, method: Method) -> bool {
        self.negative == 0
            && self.identity == 0
            && self.asymmetric == 0
            && self.triangle == 0
            && (method == Method::Cswx || self.permutation_positive == 0)
    }
}

/// Checks the metric axioms on trees drawn from `sampler`.
pub fn metric_axiom_check<R: Rng + ?Sized>(
    sampler: &mut dyn FnMut(&mut R) -> DerivationTree,
    plan: AxiomPlan,
    method: Method,
    m: &ScoringMatrix,
    rng: &mut R,
) -> Result<AxiomReport> {
    let d = |a: &DerivationTree, b: &DerivationTree| distance(a, b, method, m);
    let mut r = AxiomReport::default();
    for _ in 0..plan.pairs {
        let x = sampler(rng);
        let y = sampler(rng);
        let (xy, yx) = (d(&x, &y)?, d(&y, &x)?);
        r.pairs += 1;
        if xy < 0.0 || yx < 0.0 {
            r.negative += 1;
        }
        if xy != yx {
            r.asymmetric += 1;
        }
        if d(&x, &x)? != 0.0 {
            r.identity += 1;
        }
    }
    for _ in 0..plan.triples {
        let x = sampler(rng);
        let y = sampler(rng);
        let z = sampler(rng);
        let (xy, yz, xz) = (d(&x, &y)?, d(&y, &z)?, d(&x, &z)?);
        r.triples += 1;
        let slack = xy + yz - xz;
        r.worst_triangle_slack = r.worst_triangle_slack.min(slack);
        if slack < -TRIANGLE_SLACK {
            r.triangle += 1;
        }
    }
    for _ in 0..plan.permutations {
        let x = sampler(rng);
        let b = x.branch2_count().min(64);
        let mask = if b == 0 {
            0
        } else {
            rng.gen::<u64>() & (u64::MAX >> (64 - b))
        };
        let p = d(&x, &x.swap_branches(mask))?;
        r.permutations += 1;
        r.worst_permutation_distance = r.worst_permutation_distance.max(p);
        if p > 0.0 {
            r.permutation_positive += 1;
        }
    }
    Ok(r)
}
