//! Offspring generation from an edit path, and plain subtree crossover.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cswx::{cswx_path, Direction, EditPath};
use crate::error::{Error, Result};
use crate::grammar::{validate, DerivationTree, ModuleKind, Node};
use crate::math::skew_normal_pdf;
use crate::rcswx::rcswx_path;
use crate::scoring::ScoringMatrix;
use crate::serialise::{deserialise, SerialisedSequence, Token};
use crate::Method;

/// Paths with at most this many operations have every subset enumerated.
pub const EXACT_LIMIT: usize = 16;
/// Subsets drawn for longer paths.
pub const SAMPLED_SUBSETS: usize = 4096;

/// A chosen set of operations.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationSelection {
    /// Chosen op ids, ascending.
    pub chosen: Vec<usize>,
    pub realised_cost: f64,
    pub skewness: f64,
}

impl OperationSelection {
    pub fn empty(skewness: f64) -> Self {
        OperationSelection {
            chosen: Vec::new(),
            realised_cost: 0.0,
            skewness,
        }
    }

    /// Membership mask over `n` operations.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &id in &self.chosen {
            m[id] = true;
        }
        m
    }
}

/// Density used to weight a subset of cost `cost` on a path of cost `total`:
/// a skew-normal centred at half the path with a quarter-path scale. Its
/// support is effectively truncated to `[0, total]` because no subset can
/// cost more or less.
pub fn subset_weight(cost: f64, total: f64, skewness: f64) -> f64 {
    skew_normal_pdf(cost, total / 2.0, total / 4.0, skewness)
}

/// Draws a valid subset of the path's operations with probability
/// proportional to [`subset_weight`] of its cost.
pub fn select_operations<R: Rng + ?Sized>(
    path: &EditPath,
    skewness: f64,
    rng: &mut R,
) -> OperationSelection {
    let n = path.ops.len();
    if n == 0 {
        return OperationSelection::empty(skewness);
    }
    let total = path.total_cost;
    let candidates: Vec<Vec<bool>> = if n <= EXACT_LIMIT {
        (0u32..1 << n)
            .map(|bits| (0..n).map(|k| bits >> k & 1 == 1).collect::<Vec<bool>>())
            .filter(|sel| path.selection_valid(sel))
            .collect()
    } else {
        (0..SAMPLED_SUBSETS)
            .map(|_| sample_valid_subset(path, rng))
            .collect()
    };
    let weights: Vec<f64> = candidates
        .iter()
        .map(|sel| subset_weight(path.subset_cost(sel), total, skewness))
        .collect();
    let sum: f64 = weights.iter().sum();
    let pick = if sum > 0.0 && sum.is_finite() {
        let mut x = rng.gen::<f64>() * sum;
        let mut pick = candidates.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if x < *w {
                pick = k;
                break;
            }
            x -= w;
        }
        pick
    } else {
        rng.gen_range(0..candidates.len())
    };
    let sel = &candidates[pick];
    OperationSelection {
        chosen: (0..n).filter(|&k| sel[k]).collect(),
        realised_cost: path.subset_cost(sel),
        skewness,
    }
}

/// Random inclusion followed by repair: while some constraint is broken,
/// either drop one of its disablers or add one of its enablers.
fn sample_valid_subset<R: Rng + ?Sized>(path: &EditPath, rng: &mut R) -> Vec<bool> {
    let n = path.ops.len();
    let mut sel: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
    for _ in 0..4 * n + 16 {
        let Some(c) = path
            .constraints
            .iter()
            .find(|c| c.violated_by(&|id| sel[id]))
        else {
            return sel;
        };
        let add_enabler = !c.enablers.is_empty() && (c.disablers.is_empty() || rng.gen::<bool>());
        if add_enabler {
            let e = *c.enablers.choose(rng).expect("non-empty");
            sel[e] = true;
        } else {
            let d = *c.disablers.choose(rng).expect("non-empty");
            sel[d] = false;
        }
    }
    if path.selection_valid(&sel) {
        sel
    } else {
        vec![false; n]
    }
}

/// Applies the selected operations to the first sequence, walking the path in
/// order. Unselected removals keep the first parent's token, selected
/// additions splice in the second parent's token, and selected substitutions
/// take the second parent's label.
pub fn generate_offspring(path: &EditPath, selected: &[bool]) -> Result<DerivationTree> {
    let take = |op: Option<usize>| op.is_some_and(|id| selected[id]);
    let mut tokens = vec![Token::Start];
    for st in path.steps.iter().skip(1) {
        let t1 = st.i.map(|i| &path.s1.tokens[i]);
        let t2 = st.j.map(|j| &path.s2.tokens[j]);
        let emitted = match st.dir {
            Direction::Sub => {
                if take(st.op) {
                    t2
                } else {
                    t1
                }
            }
            Direction::Rem => (!take(st.op)).then_some(t1).flatten(),
            Direction::Add => take(st.op).then_some(t2).flatten(),
        };
        if let Some(t) = emitted {
            tokens.push(t.clone());
        }
    }
    rebuild(tokens)
}

/// Re-links separators to their openers and rebuilds the tree.
fn rebuild(mut tokens: Vec<Token>) -> Result<DerivationTree> {
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for (k, token) in tokens.iter_mut().enumerate() {
        match token {
            Token::Node { id, label } => {
                *id = 0;
                if label.is_enclosure() {
                    stack.push((k, label.separator_count()));
                }
            }
            Token::Separator { opener, .. } => {
                let Some(top) = stack.last_mut() else {
                    return Err(Error::Internal(format!("unmatched separator at {k}")));
                };
                *opener = top.0;
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
            }
            Token::Start => {}
        }
    }
    let tree = deserialise(&SerialisedSequence { tokens })
        .map_err(|e| Error::Internal(format!("offspring does not deserialise: {e}")))?;
    validate(&tree).map_err(|v| Error::Internal(format!("offspring breaks the grammar: {v:?}")))?;
    Ok(tree)
}

/// Everything produced by one alignment crossover.
#[derive(Debug, Clone)]
pub struct CrossoverOutcome {
    pub child: DerivationTree,
    pub path: EditPath,
    pub selection: OperationSelection,
}

/// Aligns the parents, traces the path, draws operations and builds the
/// child.
pub fn crossover<R: Rng + ?Sized>(
    t1: &DerivationTree,
    t2: &DerivationTree,
    method: Method,
    m: &ScoringMatrix,
    skewness: f64,
    rng: &mut R,
) -> Result<CrossoverOutcome> {
    let path = match method {
        Method::Cswx => cswx_path(t1, t2, m)?,
        Method::Rcswx => rcswx_path(t1, t2, m)?,
    };
    let selection = select_operations(&path, skewness, rng);
    let child = generate_offspring(&path, &selection.mask(path.ops.len()))?;
    Ok(CrossoverOutcome {
        child,
        path,
        selection,
    })
}

pub fn cswx_crossover<R: Rng + ?Sized>(
    t1: &DerivationTree,
    t2: &DerivationTree,
    m: &ScoringMatrix,
    skewness: f64,
    rng: &mut R,
) -> Result<DerivationTree> {
    Ok(crossover(t1, t2, Method::Cswx, m, skewness, rng)?.child)
}

pub fn rcswx_crossover<R: Rng + ?Sized>(
    t1: &DerivationTree,
    t2: &DerivationTree,
    m: &ScoringMatrix,
    skewness: f64,
    rng: &mut R,
) -> Result<DerivationTree> {
    Ok(crossover(t1, t2, Method::Rcswx, m, skewness, rng)?.child)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StxOptions {
    /// Do not cross over at computation modules. Every valid tree contains
    /// one, so without this option two trees always share a kind.
    pub exclude_computation: bool,
}

/// Subtree crossover: picks a module kind present in both parents uniformly,
/// an occurrence of it in each uniformly, and grafts the second parent's
/// subtree into the first.
pub fn stx_crossover<R: Rng + ?Sized>(
    t1: &DerivationTree,
    t2: &DerivationTree,
    options: StxOptions,
    rng: &mut R,
) -> Result<DerivationTree> {
    let kinds = |t: &DerivationTree| -> BTreeSet<ModuleKind> {
        t.module_paths()
            .iter()
            .filter_map(|p| t.node_at(p).module_kind())
            .filter(|k| !(options.exclude_computation && *k == ModuleKind::Computation))
            .collect()
    };
    let common: Vec<ModuleKind> = kinds(t1).intersection(&kinds(t2)).copied().collect();
    let Some(&kind) = common.choose(rng) else {
        return Err(Error::NoCommonNonterminals);
    };
    let occurrences = |t: &DerivationTree| -> Vec<Vec<usize>> {
        t.module_paths()
            .into_iter()
            .filter(|p| t.node_at(p).module_kind() == Some(kind))
            .collect()
    };
    let at1 = occurrences(t1).choose(rng).expect("kind occurs").clone();
    let at2 = occurrences(t2).choose(rng).expect("kind occurs").clone();
    let graft: Node = t2.node_at(&at2).clone();
    let mut child = t1.clone();
    child.replace_subtree(&at1, graft);
    validate(&child).map_err(|v| Error::Internal(format!("subtree crossover broke the grammar: {v:?}")))?;
    Ok(child)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_path_gives_parent() {
        let t = parse_tree("branch2(clone,2; comp(relu); comp(identity); add,2)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = crossover(&t, &t, Method::Rcswx, &ScoringMatrix::sm0(), 0.0, &mut rng).unwrap();
        assert!(out.selection.chosen.is_empty());
        assert_eq!(out.child, t);
    }

    #[test]
    fn full_selection_reproduces_second_parent() {
        let a = parse_tree("seq(comp(softmax), route(transpose, comp(relu), transpose))").unwrap();
        let b = parse_tree("branch2(clone,2; comp(relu); branch4(clone,4; comp(linear,16); add,4); add,2)").unwrap();
        for method in [Method::Cswx, Method::Rcswx] {
            let path = match method {
                Method::Cswx => cswx_path(&a, &b, &ScoringMatrix::sm0()).unwrap(),
                Method::Rcswx => rcswx_path(&a, &b, &ScoringMatrix::sm0()).unwrap(),
            };
            let child = generate_offspring(&path, &vec![true; path.ops.len()]).unwrap();
            assert_eq!(child.canonical_form(), b.canonical_form());
            let none = generate_offspring(&path, &vec![false; path.ops.len()]).unwrap();
            assert_eq!(none.canonical_form(), a.canonical_form());
        }
    }

    #[test]
    fn stx_on_single_computations_swaps_terminal() {
        let a = parse_tree("comp(relu)").unwrap();
        let b = parse_tree("comp(softmax)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = stx_crossover(&a, &b, StxOptions::default(), &mut rng).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn stx_reports_missing_common_kind() {
        let a = parse_tree("seq(comp(relu), comp(identity))").unwrap();
        let b = parse_tree("route(transpose, comp(relu), transpose)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = StxOptions {
            exclude_computation: true,
        };
        assert_eq!(
            stx_crossover(&a, &b, opts, &mut rng),
            Err(Error::NoCommonNonterminals)
        );
    }

    #[test]
    fn weights_are_symmetric_without_skew() {
        let w = |c| subset_weight(c, 10.0, 0.0);
        assert!((w(3.0) - w(7.0)).abs() < 1e-15);
        assert!(w(5.0) > w(4.0));
        assert!(subset_weight(8.0, 10.0, 4.0) > subset_weight(2.0, 10.0, 4.0));
    }
}
