//! Best-first search over grammar-valid edit scripts on token sequences.
//!
//! States are whole token sequences; a move is one tree edit that keeps the
//! tree valid:
//!
//! * delete a computation module (its slot must keep another module);
//! * delete an enclosure, splicing its content into the surrounding slot;
//! * relabel a node with a same-type label of the target;
//! * insert a target computation anywhere in any slot;
//! * insert a target enclosure around a run of consecutive modules of one
//!   slot (two runs for a two-way branching module).
//!
//! The search is A* with a label-count lower bound, so the first time the
//! target is popped its cost is minimal.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scoring::ScoringMatrix;
use crate::serialise::{NodeLabel, NodeType, SeparatorRole, SerialisedSequence, Token};

/// Largest combined length (start tokens included) accepted.
pub const MAX_EXHAUSTIVE_TOKENS: usize = 14;

const DIV: u8 = 254;
const CLO: u8 = 255;

struct Problem<'a> {
    labels: Vec<NodeLabel>,
    m: &'a ScoringMatrix,
    target: Vec<u8>,
    /// Target labels usable for insertion and relabelling.
    target_labels: Vec<u8>,
    types: Vec<NodeType>,
    /// Per node type: cheapest indel, cheapest positive relabel.
    type_costs: BTreeMap<NodeType, (f64, f64)>,
}

struct Slot {
    hi: usize,
    /// Item ranges `[start, end)`.
    items: Vec<(usize, usize)>,
}

impl Problem<'_> {
    fn node_indel(&self, code: u8) -> f64 {
        let label = &self.labels[code as usize];
        self.m.label_indel(label) + self.m.separator * label.separator_count() as f64
    }

    /// Separator positions of every opener.
    fn matching(&self, seq: &[u8]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); seq.len()];
        let mut stack: Vec<usize> = Vec::new();
        for (k, &c) in seq.iter().enumerate() {
            match c {
                DIV => out[*stack.last().expect("balanced")].push(k),
                CLO => {
                    let o = stack.pop().expect("balanced");
                    out[o].push(k);
                }
                _ => {
                    if self.labels[c as usize].is_enclosure() {
                        stack.push(k);
                    }
                }
            }
        }
        out
    }

    fn slots(&self, seq: &[u8], seps: &[Vec<usize>]) -> Vec<Slot> {
        let mut out = Vec::new();
        Self::collect_slot(seps, 0, seq.len(), &mut out);
        out
    }

    fn collect_slot(seps: &[Vec<usize>], lo: usize, hi: usize, out: &mut Vec<Slot>) {
        let mut items = Vec::new();
        let mut i = lo;
        while i < hi {
            if seps[i].is_empty() {
                items.push((i, i + 1));
                i += 1;
            } else {
                let mut inner = i + 1;
                for &s in &seps[i] {
                    Self::collect_slot(seps, inner, s, out);
                    inner = s + 1;
                }
                let end = *seps[i].last().expect("separator") + 1;
                items.push((i, end));
                i = end;
            }
        }
        out.push(Slot { hi, items });
    }

    fn heuristic(&self, seq: &[u8]) -> f64 {
        let mut total = 0.0;
        for (ty, &(indel, relabel)) in &self.type_costs {
            let count = |s: &[u8]| -> BTreeMap<u8, usize> {
                let mut c = BTreeMap::new();
                for &x in s {
                    if x != DIV && x != CLO && self.types[x as usize] == *ty {
                        *c.entry(x).or_insert(0) += 1;
                    }
                }
                c
            };
            let cx = count(seq);
            let ct = count(&self.target);
            let nx: usize = cx.values().sum();
            let nt: usize = ct.values().sum();
            let common: usize = cx
                .iter()
                .map(|(k, v)| (*v).min(ct.get(k).copied().unwrap_or(0)))
                .sum();
            let dn = nx.abs_diff(nt);
            let mismatch = (nx - common).max(nt - common);
            total += dn as f64 * indel + mismatch.saturating_sub(dn) as f64 * relabel.min(indel);
        }
        total
    }

    fn moves(&self, seq: &[u8], out: &mut Vec<(Vec<u8>, f64)>) {
        let seps = self.matching(seq);
        let slots = self.slots(seq, &seps);
        // Deletions.
        for slot in &slots {
            for &(s, e) in &slot.items {
                if e == s + 1 {
                    if slot.items.len() >= 2 {
                        let mut next = seq.to_vec();
                        next.remove(s);
                        out.push((next, self.node_indel(seq[s])));
                    }
                } else {
                    let next: Vec<u8> = seq
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != s && !seps[s].contains(k))
                        .map(|(_, &c)| c)
                        .collect();
                    out.push((next, self.node_indel(seq[s])));
                }
            }
        }
        // Relabelling.
        for (p, &c) in seq.iter().enumerate() {
            if c == DIV || c == CLO {
                continue;
            }
            for &t in &self.target_labels {
                if t == c {
                    continue;
                }
                let cost = self.m.label_cost(&self.labels[c as usize], &self.labels[t as usize]);
                if cost.is_finite() {
                    let mut next = seq.to_vec();
                    next[p] = t;
                    out.push((next, cost));
                }
            }
        }
        // Insertions.
        for &t in &self.target_labels {
            let label = &self.labels[t as usize];
            let cost = self.node_indel(t);
            for slot in &slots {
                let n = slot.items.len();
                let at = |k: usize| if k == n { slot.hi } else { slot.items[k].0 };
                let end = |k: usize| slot.items[k - 1].1;
                match label.separator_count() {
                    0 => {
                        for k in 0..=n {
                            let mut next = seq.to_vec();
                            next.insert(at(k), t);
                            out.push((next, cost));
                        }
                    }
                    1 => {
                        for a in 0..n {
                            for b in a + 1..=n {
                                let mut next = seq.to_vec();
                                next.insert(end(b), CLO);
                                next.insert(at(a), t);
                                out.push((next, cost));
                            }
                        }
                    }
                    _ => {
                        for a in 0..n {
                            for b in a + 1..n {
                                for c in b + 1..=n {
                                    let mut next = seq.to_vec();
                                    next.insert(end(c), CLO);
                                    next.insert(end(b), DIV);
                                    next.insert(at(a), t);
                                    out.push((next, cost));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    seq: Vec<u8>,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn encode(seq: &SerialisedSequence, labels: &mut Vec<NodeLabel>) -> Vec<u8> {
    seq.tokens
        .iter()
        .skip(1)
        .map(|t| match t {
            Token::Node { label, .. } => match labels.iter().position(|l| l == label) {
                Some(k) => k as u8,
                None => {
                    labels.push(label.clone());
                    (labels.len() - 1) as u8
                }
            },
            Token::Separator { role, .. } => match role {
                SeparatorRole::Divider => DIV,
                SeparatorRole::Closer => CLO,
            },
            Token::Start => unreachable!("start only at position 0"),
        })
        .collect()
}

/// Minimal total cost of a grammar-valid edit script turning `s1` into `s2`.
pub fn exhaustive_edit_distance(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    m: &ScoringMatrix,
) -> Result<f64> {
    s1.spans()?;
    s2.spans()?;
    let total = s1.len() + s2.len();
    if total > MAX_EXHAUSTIVE_TOKENS {
        return Err(Error::TooLarge {
            what: "combined token count",
            limit: MAX_EXHAUSTIVE_TOKENS,
            actual: total,
        });
    }
    let mut labels = Vec::new();
    let start = encode(s1, &mut labels);
    let target = encode(s2, &mut labels);
    let types: Vec<NodeType> = labels.iter().map(NodeLabel::node_type).collect();
    let mut target_labels: Vec<u8> = target.iter().copied().filter(|&c| c != DIV && c != CLO).collect();
    target_labels.sort_unstable();
    target_labels.dedup();
    let mut problem = Problem {
        labels,
        m,
        target,
        target_labels,
        types,
        type_costs: BTreeMap::new(),
    };
    for k in 0..problem.labels.len() {
        let ty = problem.types[k];
        let indel = problem.node_indel(k as u8);
        let mut relabel = f64::INFINITY;
        for l in 0..problem.labels.len() {
            let c = m.label_cost(&problem.labels[k], &problem.labels[l]);
            if l != k && c > 0.0 {
                relabel = relabel.min(c);
            }
        }
        let e = problem.type_costs.entry(ty).or_insert((indel, relabel));
        e.0 = e.0.min(indel);
        e.1 = e.1.min(relabel);
    }
    let upper: f64 = start.iter().chain(&problem.target).filter(|&&c| c != DIV && c != CLO)
        .map(|&c| problem.node_indel(c))
        .sum();
    let mut best: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start.clone(), 0.0);
    heap.push(Open {
        f: problem.heuristic(&start),
        g: 0.0,
        seq: start,
    });
    let mut buf = Vec::new();
    while let Some(Open { g, seq, .. }) = heap.pop() {
        if best.get(&seq).is_some_and(|&b| g > b) {
            continue;
        }
        if seq == problem.target {
            return Ok(g);
        }
        buf.clear();
        problem.moves(&seq, &mut buf);
        for (next, cost) in buf.drain(..) {
            let ng = g + cost;
            if best.get(&next).is_some_and(|&b| b <= ng) {
                continue;
            }
            let f = ng + problem.heuristic(&next);
            if f > upper {
                continue;
            }
            best.insert(next.clone(), ng);
            heap.push(Open { f, g: ng, seq: next });
        }
    }
    Err(Error::Unalignable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;
    use crate::serialise::serialise;

    fn seq(s: &str) -> SerialisedSequence {
        serialise(&parse_tree(s).unwrap())
    }

    #[test]
    fn identical_is_zero() {
        let s = seq("route(transpose, comp(relu), transpose)");
        assert_eq!(exhaustive_edit_distance(&s, &s, &ScoringMatrix::sm0()).unwrap(), 0.0);
    }

    #[test]
    fn relu_to_identity() {
        let d = exhaustive_edit_distance(&seq("comp(relu)"), &seq("comp(identity)"), &ScoringMatrix::sm0());
        assert_eq!(d.unwrap(), 0.5);
    }

    #[test]
    fn wrapping_and_unwrapping() {
        let m = ScoringMatrix::sm0();
        let a = seq("seq(comp(relu), comp(identity))");
        let b = seq("branch2(clone,2; comp(relu); comp(identity); add,2)");
        assert_eq!(exhaustive_edit_distance(&a, &b, &m).unwrap(), 1.0);
        assert_eq!(exhaustive_edit_distance(&b, &a, &m).unwrap(), 1.0);
    }
}
