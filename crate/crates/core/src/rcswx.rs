//! Branch-order invariant alignment.
//!
//! Each sequence becomes a position graph in which a two-way branching module
//! can be walked in either order: after the opener the graph forks into the
//! original order and the swapped order (second branch, divider, first
//! branch), and the two forks join again at the closer. The shared dynamic
//! programme then keeps, at every closer, the cheapest way in over both
//! orders. A position inside `d` nested two-way spans exists in `2^d`
//! variants, so a cell pairs at most `2^(d_i + d_j)` variants.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::cswx::{fill, trace_back, Alignment, Dag, DagNode, Direction, EditPath};
use crate::error::{Error, Result};
use crate::scoring::ScoringMatrix;
use crate::serialise::{serialise, SerialisedSequence, Span};
use crate::DerivationTree;

/// Largest number of two-way branching modules per sequence.
pub const MAX_SPANS: usize = 64;
/// Largest position graph built for one sequence.
pub const MAX_VARIANT_NODES: usize = 1 << 20;

/// A two-way branching module's token positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchSpan {
    pub opener: usize,
    pub divider: usize,
    pub closer: usize,
    /// Number of enclosing two-way spans.
    pub depth: usize,
}

/// Two-way spans of a sequence, in opener order.
pub fn branch_spans(seq: &SerialisedSequence) -> Result<Vec<BranchSpan>> {
    let spans = seq.spans()?;
    let mut out: Vec<BranchSpan> = Vec::new();
    for span in spans.iter().flatten() {
        if let Some(divider) = span.divider {
            let depth = out
                .iter()
                .filter(|o| o.opener < span.opener && span.closer < o.closer)
                .count();
            out.push(BranchSpan {
                opener: span.opener,
                divider,
                closer: span.closer,
                depth,
            });
        }
    }
    Ok(out)
}

/// Number of enclosing two-way spans of every token, counting a divider as
/// inside its own span and openers/closers as outside.
pub fn token_depths(seq: &SerialisedSequence) -> Result<Vec<u32>> {
    let spans = branch_spans(seq)?;
    let mut depth = vec![0u32; seq.len()];
    for s in &spans {
        for d in depth.iter_mut().take(s.closer).skip(s.opener + 1) {
            *d += 1;
        }
    }
    Ok(depth)
}

pub(crate) fn variant_dag(seq: &SerialisedSequence) -> Result<Dag> {
    let spans = seq.spans()?;
    let mut bit_of: BTreeMap<usize, u32> = BTreeMap::new();
    for span in spans.iter().flatten() {
        if span.divider.is_some() {
            let next = bit_of.len() as u32;
            bit_of.insert(span.opener, next);
        }
    }
    if bit_of.len() > MAX_SPANS {
        return Err(Error::TooLarge {
            what: "two-way branching count",
            limit: MAX_SPANS,
            actual: bit_of.len(),
        });
    }
    let size: usize = token_depths(seq)?
        .iter()
        .map(|&d| 1usize.checked_shl(d).unwrap_or(usize::MAX))
        .fold(0usize, usize::saturating_add);
    if size > MAX_VARIANT_NODES {
        return Err(Error::TooLarge {
            what: "branch-order variant graph",
            limit: MAX_VARIANT_NODES,
            actual: size,
        });
    }
    let mut b = Builder {
        spans: &spans,
        bit_of: &bit_of,
        nodes: vec![DagNode {
            token: 0,
            mask: 0,
            preds: Vec::new(),
        }],
    };
    b.lay(1, seq.len(), 0, vec![0]);
    Ok(Dag { nodes: b.nodes })
}

struct Builder<'a> {
    spans: &'a [Option<Span>],
    bit_of: &'a BTreeMap<usize, u32>,
    nodes: Vec<DagNode>,
}

impl Builder<'_> {
    fn add(&mut self, token: usize, mask: u64, preds: Vec<u32>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(DagNode { token, mask, preds });
        id
    }

    /// Lays out tokens `[lo, hi)` after `preds`; returns the exits.
    fn lay(&mut self, lo: usize, hi: usize, mask: u64, mut preds: Vec<u32>) -> Vec<u32> {
        let mut i = lo;
        while i < hi {
            match self.spans[i] {
                Some(Span {
                    divider: Some(d),
                    closer: c,
                    ..
                }) => {
                    let bit = 1u64 << self.bit_of[&i];
                    let opener = self.add(i, mask, preds);
                    let mut exits = Vec::new();
                    for swapped in [false, true] {
                        let m = if swapped { mask | bit } else { mask };
                        let (first, second) = if swapped {
                            ((d + 1, c), (i + 1, d))
                        } else {
                            ((i + 1, d), (d + 1, c))
                        };
                        let a = self.lay(first.0, first.1, m, vec![opener]);
                        let div = self.add(d, m, a);
                        exits.extend(self.lay(second.0, second.1, m, vec![div]));
                    }
                    preds = vec![self.add(c, mask, exits)];
                    i = c + 1;
                }
                _ => {
                    preds = vec![self.add(i, mask, preds)];
                    i += 1;
                }
            }
        }
        preds
    }
}

/// Aligns two sequences up to the branch order of their two-way branching
/// modules. The returned matrix holds, per token pair, the cheapest entry over
/// all variants.
pub fn align_recursive(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    m: &ScoringMatrix,
) -> Result<Alignment> {
    align_recursive_with_order(s1, s2, m, Direction::DEFAULT_ORDER)
}

pub fn align_recursive_with_order(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    m: &ScoringMatrix,
    order: [Direction; 3],
) -> Result<Alignment> {
    let d1 = variant_dag(s1)?;
    let d2 = variant_dag(s2)?;
    let filled = fill(s1, s2, d1, d2, m, order);
    Alignment::from_filled(s1, s2, filled)
}

pub fn rcswx_distance(a: &DerivationTree, b: &DerivationTree, m: &ScoringMatrix) -> Result<f64> {
    Ok(align_recursive(&serialise(a), &serialise(b), m)?.distance)
}

/// Edit path of the invariant alignment. Steps inside swapped branches are
/// listed in the swapped order and carry the variant bits they were traced
/// through.
pub fn rcswx_path(a: &DerivationTree, b: &DerivationTree, m: &ScoringMatrix) -> Result<EditPath> {
    Ok(rcswx_trace_back(&align_recursive(
        &serialise(a),
        &serialise(b),
        m,
    )?))
}

pub fn rcswx_trace_back(alignment: &Alignment) -> EditPath {
    trace_back(alignment)
}

/// `Σ_ij 2^(d_i + d_j)`: cells the invariant alignment fills.
pub fn visit_bound(s1: &SerialisedSequence, s2: &SerialisedSequence) -> Result<u64> {
    let sum = |s: &SerialisedSequence| -> Result<u64> {
        Ok(token_depths(s)?.iter().map(|&d| 1u64 << d).sum())
    };
    Ok(sum(s1)? * sum(s2)?)
}

/// `2^b · |s1| · |s2|`: cells filled by aligning every branch-order
/// combination separately.
pub fn brute_force_visits(s1: &SerialisedSequence, s2: &SerialisedSequence) -> Result<u64> {
    let b = branch_spans(s1)?.len() + branch_spans(s2)?.len();
    Ok((1u64 << b.min(63)) * s1.len() as u64 * s2.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cswx::{align, cswx_distance};
    use crate::grammar::parse_tree;

    fn tree(s: &str) -> DerivationTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn swapped_branches_are_equal() {
        let m = ScoringMatrix::sm0();
        let a = tree("branch2(clone,2; comp(linear,64); comp(identity); add,2)");
        let b = tree("branch2(clone,2; comp(identity); comp(linear,64); add,2)");
        assert_eq!(rcswx_distance(&a, &b, &m).unwrap(), 0.0);
        assert!(cswx_distance(&a, &b, &m).unwrap() > 0.0);
        assert!(rcswx_path(&a, &b, &m).unwrap().ops.is_empty());
    }

    #[test]
    fn nested_swaps_are_equal() {
        let m = ScoringMatrix::sm0();
        let a = tree(
            "seq(comp(relu), branch2(clone,2; branch2(group,1,2; comp(softmax); seq(comp(relu), comp(pos-enc)); cat,1,2); comp(identity); add,2))",
        );
        for mask in 0..4 {
            let b = a.swap_branches(mask);
            assert_eq!(rcswx_distance(&a, &b, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn branch_free_matches_plain() {
        let m = ScoringMatrix::sm0();
        let a = serialise(&tree("seq(comp(relu), route(transpose, comp(identity), transpose))"));
        let b = serialise(&tree("branch4(clone,4; comp(relu); add,4)"));
        let plain = align(&a, &b, &m).unwrap();
        let rec = align_recursive(&a, &b, &m).unwrap();
        assert_eq!(plain.matrix, rec.matrix);
        assert_eq!(plain.stats.cell_visits, rec.stats.cell_visits);
    }

    #[test]
    fn visits_match_bound() {
        let m = ScoringMatrix::sm0();
        let a = serialise(&tree(
            "branch2(clone,2; branch2(clone,2; comp(relu); comp(identity); add,2); comp(identity); add,2)",
        ));
        let b = serialise(&tree("branch2(clone,2; comp(softmax); comp(identity); add,2)"));
        let rec = align_recursive(&a, &b, &m).unwrap();
        assert_eq!(rec.stats.cell_visits, visit_bound(&a, &b).unwrap());
        assert!(rec.stats.cell_visits <= brute_force_visits(&a, &b).unwrap());
        assert_eq!(rec.stats.variant_peak, 8);
    }

    #[test]
    fn depths() {
        let s = serialise(&tree("branch2(clone,2; comp(relu); comp(identity); add,2)"));
        assert_eq!(token_depths(&s).unwrap(), vec![0, 0, 1, 1, 1, 0]);
    }
}
