use crate::cswx::cswx_distance;
use crate::error::{Error, Result};
use crate::grammar::DerivationTree;
use crate::scoring::ScoringMatrix;

/// Largest combined number of two-way branching modules accepted.
pub const MAX_BRUTE_FORCE_BRANCHES: usize = 10;

/// Minimum plain alignment distance over all `2^b` branch orders of both
/// trees, `b` being their combined two-way branching count.
pub fn brute_force_permutation_distance(
    a: &DerivationTree,
    b: &DerivationTree,
    m: &ScoringMatrix,
) -> Result<f64> {
    let (ba, bb) = (a.branch2_count(), b.branch2_count());
    if ba + bb > MAX_BRUTE_FORCE_BRANCHES {
        return Err(Error::TooLarge {
            what: "combined two-way branching count",
            limit: MAX_BRUTE_FORCE_BRANCHES,
            actual: ba + bb,
        });
    }
    let mut best = f64::INFINITY;
    for ma in 0u64..1 << ba {
        let va = a.swap_branches(ma);
        for mb in 0u64..1 << bb {
            let vb = b.swap_branches(mb);
            match cswx_distance(&va, &vb, m) {
                Ok(d) => best = best.min(d),
                Err(Error::Unalignable) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Unalignable)
    }
}
