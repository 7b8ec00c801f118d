//! Constrained alignment of serialised trees, traceback to an edit path and
//! the syntactic distance.
//!
//! The dynamic programme runs over pairs of positions in two token graphs.
//! For plain alignment each graph is the token chain; the permutation
//! invariant variant (see [`crate::rcswx`]) feeds graphs whose paths visit
//! the branches of two-way branching modules in either order. Each cell keeps
//! one entry per bracket state: the stack of enclosure openers matched to
//! each other and still open. A separator may only be substituted for the
//! matching separator of the opener it was paired with, and may only be
//! inserted or deleted when its opener was inserted or deleted too, so every
//! path through the table is a grammar-valid edit script.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::scoring::ScoringMatrix;
use crate::serialise::{serialise, SerialisedSequence, Token};
use crate::DerivationTree;

/// Move taken into a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    /// Diagonal: pair a token of each sequence.
    Sub,
    /// Vertical: a token of the first sequence has no partner (it is removed).
    Rem,
    /// Horizontal: a token of the second sequence has no partner (it is added).
    Add,
}

impl Direction {
    /// Default preference among equal-cost moves.
    pub const DEFAULT_ORDER: [Direction; 3] = [Direction::Sub, Direction::Rem, Direction::Add];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Sub => "sub",
            Direction::Rem => "rem",
            Direction::Add => "add",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-token-pair view of a filled table: the cheapest entry over bracket
/// states (and, for the invariant variant, over branch orders).
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    pub rows: usize,
    pub cols: usize,
    pub dist: Vec<f64>,
    pub back: Vec<Option<Direction>>,
}

impl AlignmentMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.cols + j]
    }

    pub fn back(&self, i: usize, j: usize) -> Option<Direction> {
        self.back[i * self.cols + j]
    }

    pub fn transpose(&self) -> AlignmentMatrix {
        let mut dist = vec![0.0; self.dist.len()];
        let mut back = vec![None; self.back.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                dist[j * self.rows + i] = self.dist[i * self.cols + j];
                back[j * self.rows + i] = self.back[i * self.cols + j].map(|d| match d {
                    Direction::Rem => Direction::Add,
                    Direction::Add => Direction::Rem,
                    Direction::Sub => Direction::Sub,
                });
            }
        }
        AlignmentMatrix {
            rows: self.cols,
            cols: self.rows,
            dist,
            back,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OpKind {
    AddNode,
    RemoveNode,
    Substitute,
    /// An enclosure opener inserted together with its separators.
    AddEnclosure,
    /// An enclosure opener deleted together with its separators.
    RemoveEnclosure,
}

/// One logical edit with positive cost.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EditOperation {
    /// Ids are assigned in path order, starting at 0.
    pub id: usize,
    pub kind: OpKind,
    pub value: f64,
    /// Token indices of the node step (first sequence, second sequence).
    pub i: usize,
    pub j: usize,
    /// Token cells of the separator steps of an enclosure operation.
    pub separators: Vec<(usize, usize)>,
    /// Operations which, when all selected, forbid this one unless an enabler
    /// is selected as well (union over the constraints that mention it).
    pub disablers: Vec<usize>,
    pub enablers: Vec<usize>,
    /// Branch-order variant of the node step (swap bits of each sequence).
    pub variant: (u64, u64),
}

/// Selection rule: a subset is rejected when it contains every disabler and
/// no enabler.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constraint {
    pub disablers: Vec<usize>,
    pub enablers: Vec<usize>,
}

impl Constraint {
    pub fn violated_by(&self, selected: &dyn Fn(usize) -> bool) -> bool {
        self.disablers.iter().all(|&d| selected(d)) && !self.enablers.iter().any(|&e| selected(e))
    }
}

/// One column of the traced alignment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Step {
    pub dir: Direction,
    /// Token consumed from the first sequence, if any.
    pub i: Option<usize>,
    /// Token consumed from the second sequence, if any.
    pub j: Option<usize>,
    pub cost: f64,
    /// Operation this step belongs to.
    pub op: Option<usize>,
    pub variant: (u64, u64),
}

/// A minimum-cost grammar-valid edit script from the first sequence to the
/// second.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EditPath {
    pub s1: SerialisedSequence,
    pub s2: SerialisedSequence,
    pub steps: Vec<Step>,
    pub ops: Vec<EditOperation>,
    pub constraints: Vec<Constraint>,
    pub total_cost: f64,
}

impl EditPath {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Whether `selected` (indexed by op id) breaks any constraint.
    pub fn selection_valid(&self, selected: &[bool]) -> bool {
        !self
            .constraints
            .iter()
            .any(|c| c.violated_by(&|id| selected[id]))
    }

    pub fn subset_cost(&self, selected: &[bool]) -> f64 {
        self.ops
            .iter()
            .filter(|op| selected[op.id])
            .map(|op| op.value)
            .sum()
    }
}

/// Counters describing the work done by one alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlignStats {
    /// Number of (position, position) cells filled.
    pub cell_visits: u64,
    /// Largest number of branch-order variants sharing one token pair.
    pub variant_peak: u64,
    /// Largest number of bracket states held by one cell.
    pub state_peak: u64,
}

// ---------------------------------------------------------------------------
// Token graphs

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DagNode {
    pub token: usize,
    pub mask: u64,
    /// Predecessors, in increasing order of preference.
    pub preds: Vec<u32>,
}

/// Position graph over a token sequence. Node 0 is the start token; the last
/// node is the only sink; nodes are stored in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Dag {
    pub nodes: Vec<DagNode>,
}

impl Dag {
    pub fn chain(len: usize) -> Dag {
        Dag {
            nodes: (0..len)
                .map(|k| DagNode {
                    token: k,
                    mask: 0,
                    preds: if k == 0 { Vec::new() } else { vec![k as u32 - 1] },
                })
                .collect(),
        }
    }

    /// Variants per token.
    pub fn multiplicity(&self, len: usize) -> Vec<u64> {
        let mut out = vec![0u64; len];
        for n in &self.nodes {
            out[n.token] += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Bracket states: persistent stacks of matched opener pairs, interned.

struct Stacks {
    parent: Vec<u32>,
    pair: Vec<(u32, u32)>,
    index: BTreeMap<(u32, u32, u32), u32>,
}

impl Stacks {
    const EMPTY: u32 = 0;

    fn new() -> Self {
        Stacks {
            parent: vec![0],
            pair: vec![(u32::MAX, u32::MAX)],
            index: BTreeMap::new(),
        }
    }

    fn push(&mut self, state: u32, pair: (u32, u32)) -> u32 {
        let key = (state, pair.0, pair.1);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.parent.len() as u32;
        self.parent.push(state);
        self.pair.push(pair);
        self.index.insert(key, id);
        id
    }

    fn top(&self, state: u32) -> Option<(u32, u32)> {
        (state != Self::EMPTY).then(|| self.pair[state as usize])
    }

    fn pop(&self, state: u32) -> u32 {
        self.parent[state as usize]
    }

    fn contains(&self, mut state: u32, pred: impl Fn((u32, u32)) -> bool) -> bool {
        while state != Self::EMPTY {
            if pred(self.pair[state as usize]) {
                return true;
            }
            state = self.parent[state as usize];
        }
        false
    }
}

#[derive(Debug, Clone, Copy)]
struct Back {
    dir: Direction,
    cell: u32,
    entry: u32,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    state: u32,
    dist: f64,
    back: Option<Back>,
}

/// Result of filling the table over two token graphs.
pub(crate) struct Filled {
    dag1: Dag,
    dag2: Dag,
    cells: Vec<Vec<Entry>>,
    stats: AlignStats,
}

/// Applies one move to a bracket state; `None` when the move is not
/// admissible. Tokens are given with their sequence positions.
fn step_state(
    stacks: &mut Stacks,
    state: u32,
    dir: Direction,
    t1: (usize, &Token),
    t2: (usize, &Token),
) -> Option<u32> {
    match dir {
        Direction::Sub => match (t1.1, t2.1) {
            (Token::Node { .. }, Token::Node { .. }) => {
                if t1.1.is_opener() {
                    Some(stacks.push(state, (t1.0 as u32, t2.0 as u32)))
                } else {
                    Some(state)
                }
            }
            (
                Token::Separator {
                    opener: o1,
                    role: r1,
                },
                Token::Separator {
                    opener: o2,
                    role: r2,
                },
            ) => {
                if r1 != r2 || stacks.top(state) != Some((*o1 as u32, *o2 as u32)) {
                    return None;
                }
                Some(match r1 {
                    crate::serialise::SeparatorRole::Closer => stacks.pop(state),
                    crate::serialise::SeparatorRole::Divider => state,
                })
            }
            _ => None,
        },
        Direction::Rem => match t1.1 {
            Token::Separator { opener, .. } => {
                let o = *opener as u32;
                (!stacks.contains(state, |p| p.0 == o)).then_some(state)
            }
            Token::Start => None,
            Token::Node { .. } => Some(state),
        },
        Direction::Add => match t2.1 {
            Token::Separator { opener, .. } => {
                let o = *opener as u32;
                (!stacks.contains(state, |p| p.1 == o)).then_some(state)
            }
            Token::Start => None,
            Token::Node { .. } => Some(state),
        },
    }
}

/// Fills the table. Candidate moves are tried in `order`, predecessors in
/// their stored order, and a later candidate replaces an earlier one only
/// when strictly cheaper.
pub(crate) fn fill(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    dag1: Dag,
    dag2: Dag,
    m: &ScoringMatrix,
    order: [Direction; 3],
) -> Filled {
    let n1 = dag1.nodes.len();
    let n2 = dag2.nodes.len();
    let mut stacks = Stacks::new();
    let mut cells: Vec<Vec<Entry>> = Vec::with_capacity(n1 * n2);
    let mut stats = AlignStats::default();
    for u in 0..n1 {
        for v in 0..n2 {
            stats.cell_visits += 1;
            let mut here: Vec<Entry> = Vec::new();
            if u == 0 && v == 0 {
                here.push(Entry {
                    state: Stacks::EMPTY,
                    dist: 0.0,
                    back: None,
                });
                cells.push(here);
                continue;
            }
            let k1 = dag1.nodes[u].token;
            let k2 = dag2.nodes[v].token;
            let t1 = (k1, &s1.tokens[k1]);
            let t2 = (k2, &s2.tokens[k2]);
            for dir in order {
                let cost = match dir {
                    Direction::Sub => m.substitution(t1.1, t2.1),
                    Direction::Rem => m.indel(t1.1),
                    Direction::Add => m.indel(t2.1),
                };
                if !cost.is_finite() {
                    continue;
                }
                let (u_self, v_self) = ([u as u32], [v as u32]);
                let (us, vs): (&[u32], &[u32]) = match dir {
                    Direction::Sub => (&dag1.nodes[u].preds, &dag2.nodes[v].preds),
                    Direction::Rem => (&dag1.nodes[u].preds, &v_self),
                    Direction::Add => (&u_self, &dag2.nodes[v].preds),
                };
                for &pu in us {
                    for &pv in vs {
                        let cell = pu as usize * n2 + pv as usize;
                        for (e_idx, e) in cells[cell].iter().enumerate() {
                            let Some(state) = step_state(&mut stacks, e.state, dir, t1, t2) else {
                                continue;
                            };
                            let dist = e.dist + cost;
                            let back = Some(Back {
                                dir,
                                cell: cell as u32,
                                entry: e_idx as u32,
                            });
                            match here.iter_mut().find(|x| x.state == state) {
                                Some(x) if dist < x.dist => {
                                    x.dist = dist;
                                    x.back = back;
                                }
                                Some(_) => {}
                                None => here.push(Entry { state, dist, back }),
                            }
                        }
                    }
                }
            }
            stats.state_peak = stats.state_peak.max(here.len() as u64);
            cells.push(here);
        }
    }
    let m1 = dag1.multiplicity(s1.len());
    let m2 = dag2.multiplicity(s2.len());
    stats.variant_peak = m1.iter().max().copied().unwrap_or(1) * m2.iter().max().copied().unwrap_or(1);
    Filled {
        dag1,
        dag2,
        cells,
        stats,
    }
}

impl Filled {
    fn sink(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn distance(&self) -> Option<f64> {
        self.cells[self.sink()]
            .iter()
            .find(|e| e.state == Stacks::EMPTY)
            .map(|e| e.dist)
            .filter(|d| d.is_finite())
    }

    pub fn stats(&self) -> AlignStats {
        self.stats
    }

    pub fn matrix(&self, rows: usize, cols: usize) -> AlignmentMatrix {
        let mut dist = vec![f64::INFINITY; rows * cols];
        let mut back = vec![None; rows * cols];
        let n2 = self.dag2.nodes.len();
        for (idx, cell) in self.cells.iter().enumerate() {
            let (u, v) = (idx / n2, idx % n2);
            let k = self.dag1.nodes[u].token * cols + self.dag2.nodes[v].token;
            for e in cell {
                if e.dist < dist[k] {
                    dist[k] = e.dist;
                    back[k] = e.back.map(|b| b.dir);
                }
            }
        }
        AlignmentMatrix {
            rows,
            cols,
            dist,
            back,
        }
    }

    /// Walks back-pointers from the sink's empty-stack entry.
    pub fn trace(&self) -> Option<Vec<RawStep>> {
        let n2 = self.dag2.nodes.len();
        let mut cell = self.sink();
        let mut entry = self.cells[cell]
            .iter()
            .position(|e| e.state == Stacks::EMPTY && e.dist.is_finite())?;
        let mut out = Vec::new();
        while let Some(back) = self.cells[cell][entry].back {
            let (u, v) = (cell / n2, cell % n2);
            let here = self.cells[cell][entry].dist;
            let prev = self.cells[back.cell as usize][back.entry as usize].dist;
            let (n1, n2node) = (&self.dag1.nodes[u], &self.dag2.nodes[v]);
            out.push(RawStep {
                dir: back.dir,
                i: (back.dir != Direction::Add).then_some(n1.token),
                j: (back.dir != Direction::Rem).then_some(n2node.token),
                cost: here - prev,
                variant: (n1.mask, n2node.mask),
            });
            cell = back.cell as usize;
            entry = back.entry as usize;
        }
        out.reverse();
        Some(out)
    }
}

pub(crate) struct RawStep {
    pub dir: Direction,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub cost: f64,
    pub variant: (u64, u64),
}

// ---------------------------------------------------------------------------
// Public API

/// A filled alignment between two sequences.
pub struct Alignment {
    pub s1: SerialisedSequence,
    pub s2: SerialisedSequence,
    pub matrix: AlignmentMatrix,
    pub distance: f64,
    pub stats: AlignStats,
    filled: Filled,
}

impl fmt::Debug for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Alignment")
            .field("distance", &self.distance)
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

impl Alignment {
    pub(crate) fn from_filled(
        s1: &SerialisedSequence,
        s2: &SerialisedSequence,
        filled: Filled,
    ) -> Result<Alignment> {
        let distance = filled.distance().ok_or(Error::Unalignable)?;
        Ok(Alignment {
            matrix: filled.matrix(s1.len(), s2.len()),
            stats: filled.stats(),
            s1: s1.clone(),
            s2: s2.clone(),
            distance,
            filled,
        })
    }
}

fn check_inputs(s1: &SerialisedSequence, s2: &SerialisedSequence) -> Result<()> {
    s1.spans()?;
    s2.spans()?;
    Ok(())
}

/// Aligns two sequences in their given order.
pub fn align(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    m: &ScoringMatrix,
) -> Result<Alignment> {
    align_with_order(s1, s2, m, Direction::DEFAULT_ORDER)
}

/// As [`align`], with an explicit preference among equal-cost moves.
pub fn align_with_order(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    m: &ScoringMatrix,
    order: [Direction; 3],
) -> Result<Alignment> {
    check_inputs(s1, s2)?;
    let filled = fill(s1, s2, Dag::chain(s1.len()), Dag::chain(s2.len()), m, order);
    Alignment::from_filled(s1, s2, filled)
}

pub fn cswx_distance(a: &DerivationTree, b: &DerivationTree, m: &ScoringMatrix) -> Result<f64> {
    Ok(align(&serialise(a), &serialise(b), m)?.distance)
}

/// Edit path of the plain alignment between two trees.
pub fn cswx_path(a: &DerivationTree, b: &DerivationTree, m: &ScoringMatrix) -> Result<EditPath> {
    Ok(trace_back(&align(&serialise(a), &serialise(b), m)?))
}

/// Builds the edit path of an alignment: operations with positive cost in
/// path order, their separator steps, and the selection constraints.
pub fn trace_back(alignment: &Alignment) -> EditPath {
    let raw = alignment
        .filled
        .trace()
        .expect("alignment has a finite distance");
    build_path(&alignment.s1, &alignment.s2, raw, alignment.distance)
}

fn build_path(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    raw: Vec<RawStep>,
    total_cost: f64,
) -> EditPath {
    let mut steps: Vec<Step> = Vec::with_capacity(raw.len() + 1);
    steps.push(Step {
        dir: Direction::Sub,
        i: Some(0),
        j: Some(0),
        cost: 0.0,
        op: None,
        variant: (0, 0),
    });
    let mut ops: Vec<EditOperation> = Vec::new();
    // Enclosure ops by opener index, per side.
    let mut removed_by_opener: BTreeMap<usize, usize> = BTreeMap::new();
    let mut added_by_opener: BTreeMap<usize, usize> = BTreeMap::new();
    let (mut ci, mut cj) = (0usize, 0usize);
    for r in raw {
        if let Some(i) = r.i {
            ci = i;
        }
        if let Some(j) = r.j {
            cj = j;
        }
        let mut op = None;
        match r.dir {
            Direction::Sub => {
                if r.cost > 0.0 {
                    op = Some(new_op(&mut ops, OpKind::Substitute, r.cost, ci, cj, r.variant));
                }
            }
            Direction::Rem => {
                let i = r.i.expect("rem consumes a first-sequence token");
                match &s1.tokens[i] {
                    Token::Separator { opener, .. } => {
                        if let Some(&id) = removed_by_opener.get(opener) {
                            ops[id].separators.push((ci, cj));
                            ops[id].value += r.cost;
                            op = Some(id);
                        }
                    }
                    t => {
                        let kind = if t.is_opener() {
                            OpKind::RemoveEnclosure
                        } else {
                            OpKind::RemoveNode
                        };
                        let id = new_op(&mut ops, kind, r.cost, ci, cj, r.variant);
                        if t.is_opener() {
                            removed_by_opener.insert(i, id);
                        }
                        op = Some(id);
                    }
                }
            }
            Direction::Add => {
                let j = r.j.expect("add consumes a second-sequence token");
                match &s2.tokens[j] {
                    Token::Separator { opener, .. } => {
                        if let Some(&id) = added_by_opener.get(opener) {
                            ops[id].separators.push((ci, cj));
                            ops[id].value += r.cost;
                            op = Some(id);
                        }
                    }
                    t => {
                        let kind = if t.is_opener() {
                            OpKind::AddEnclosure
                        } else {
                            OpKind::AddNode
                        };
                        let id = new_op(&mut ops, kind, r.cost, ci, cj, r.variant);
                        if t.is_opener() {
                            added_by_opener.insert(j, id);
                        }
                        op = Some(id);
                    }
                }
            }
        }
        steps.push(Step {
            dir: r.dir,
            i: r.i,
            j: r.j,
            cost: r.cost,
            op,
            variant: r.variant,
        });
    }
    let constraints = derive_constraints(s1, s2, &steps);
    for c in &constraints {
        for &d in &c.disablers {
            let op = &mut ops[d];
            op.disablers.extend(c.disablers.iter().copied().filter(|&x| x != d));
            op.enablers.extend(c.enablers.iter().copied());
        }
    }
    for op in &mut ops {
        op.disablers.sort_unstable();
        op.disablers.dedup();
        op.enablers.sort_unstable();
        op.enablers.dedup();
    }
    EditPath {
        s1: s1.clone(),
        s2: s2.clone(),
        steps,
        ops,
        constraints,
        total_cost,
    }
}

fn new_op(
    ops: &mut Vec<EditOperation>,
    kind: OpKind,
    value: f64,
    i: usize,
    j: usize,
    variant: (u64, u64),
) -> usize {
    let id = ops.len();
    ops.push(EditOperation {
        id,
        kind,
        value,
        i,
        j,
        separators: Vec::new(),
        disablers: Vec::new(),
        enablers: Vec::new(),
        variant,
    });
    id
}

/// How an enclosure on the path survives into an offspring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Presence {
    Root,
    Matched,
    /// Present unless its removal is selected.
    Removed(usize),
    /// Present only if its addition is selected.
    Added(usize),
}

/// Step positions delimiting an enclosure on the path.
#[derive(Debug, Clone)]
struct PathEnclosure {
    presence: Presence,
    /// Opener step, separator steps.
    bounds: Vec<usize>,
}

fn path_enclosures(s1: &SerialisedSequence, s2: &SerialisedSequence, steps: &[Step]) -> Vec<PathEnclosure> {
    let mut out = vec![PathEnclosure {
        presence: Presence::Root,
        bounds: vec![0, steps.len()],
    }];
    let mut by_s1: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_s2: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, st) in steps.iter().enumerate().skip(1) {
        let tok = match (st.dir, st.i, st.j) {
            (Direction::Add, _, Some(j)) => &s2.tokens[j],
            (_, Some(i), _) => &s1.tokens[i],
            _ => continue,
        };
        match tok {
            Token::Node { .. } if tok.is_opener() => {
                let presence = match st.dir {
                    Direction::Sub => Presence::Matched,
                    Direction::Rem => Presence::Removed(st.op.expect("removal has an op")),
                    Direction::Add => Presence::Added(st.op.expect("addition has an op")),
                };
                let idx = out.len();
                out.push(PathEnclosure {
                    presence,
                    bounds: vec![k],
                });
                match st.dir {
                    Direction::Add => {
                        by_s2.insert(st.j.expect("add step"), idx);
                    }
                    _ => {
                        by_s1.insert(st.i.expect("sub or rem step"), idx);
                    }
                }
            }
            Token::Separator { opener, .. } => {
                let idx = match st.dir {
                    Direction::Add => by_s2.get(opener),
                    _ => by_s1.get(opener),
                };
                if let Some(&idx) = idx {
                    out[idx].bounds.push(k);
                }
            }
            _ => {}
        }
    }
    out
}

fn derive_constraints(
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    steps: &[Step],
) -> Vec<Constraint> {
    let enclosures = path_enclosures(s1, s2, steps);
    let is_node_step = |st: &Step| -> bool {
        match (st.dir, st.i, st.j) {
            (Direction::Add, _, Some(j)) => matches!(s2.tokens[j], Token::Node { .. }),
            (_, Some(i), _) => matches!(s1.tokens[i], Token::Node { .. }),
            _ => false,
        }
    };
    let mut out: Vec<Constraint> = Vec::new();
    // Every slot of every surviving enclosure must keep a module.
    for enc in &enclosures {
        for w in enc.bounds.windows(2) {
            let (lo, hi) = (w[0] + 1, w[1]);
            let mut removed = Vec::new();
            let mut added = Vec::new();
            let mut anchored = false;
            for st in &steps[lo..hi] {
                if !is_node_step(st) {
                    continue;
                }
                match st.dir {
                    Direction::Sub => anchored = true,
                    Direction::Rem => removed.push(st.op.expect("removal op")),
                    Direction::Add => added.push(st.op.expect("addition op")),
                }
            }
            if anchored {
                continue;
            }
            match enc.presence {
                Presence::Added(a) => removed.push(a),
                Presence::Removed(d) => added.push(d),
                _ => {}
            }
            removed.sort_unstable();
            removed.dedup();
            added.sort_unstable();
            added.dedup();
            out.push(Constraint {
                disablers: removed,
                enablers: added,
            });
        }
    }
    // A kept removal and a selected addition must nest properly.
    for d in &enclosures {
        let Presence::Removed(dop) = d.presence else {
            continue;
        };
        for a in &enclosures {
            let Presence::Added(aop) = a.presence else {
                continue;
            };
            if !compatible(&d.bounds, &a.bounds) {
                out.push(Constraint {
                    disablers: vec![aop],
                    enablers: vec![dop],
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Whether two enclosures (given as opener and separator step positions) are
/// disjoint, or one lies inside a single slot of the other.
fn compatible(x: &[usize], y: &[usize]) -> bool {
    let (xo, xc) = (x[0], *x.last().expect("bounds"));
    let (yo, yc) = (y[0], *y.last().expect("bounds"));
    if xc < yo || yc < xo {
        return true;
    }
    let inside_slot = |outer: &[usize], lo: usize, hi: usize| {
        outer.windows(2).any(|w| w[0] < lo && hi < w[1])
    };
    inside_slot(x, yo, yc) || inside_slot(y, xo, xc)
}

/// Human-readable summary of an operation.
pub fn describe_op(path: &EditPath, op: &EditOperation) -> String {
    let label = |seq: &SerialisedSequence, k: usize| {
        seq.tokens[k]
            .label()
            .map(|l| format!("{l}"))
            .unwrap_or_else(|| String::from("?"))
    };
    match op.kind {
        OpKind::RemoveNode | OpKind::RemoveEnclosure => {
            format!("{:?} {}", op.kind, label(&path.s1, op.i))
        }
        OpKind::AddNode | OpKind::AddEnclosure => {
            format!("{:?} {}", op.kind, label(&path.s2, op.j))
        }
        OpKind::Substitute => format!(
            "Substitute {} -> {}",
            label(&path.s1, op.i),
            label(&path.s2, op.j)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;
    use crate::scoring::Preset;

    fn seq(text: &str) -> SerialisedSequence {
        serialise(&parse_tree(text).unwrap())
    }

    fn dist(a: &str, b: &str) -> f64 {
        align(&seq(a), &seq(b), &ScoringMatrix::sm0()).unwrap().distance
    }

    #[test]
    fn identity_alignment_is_free() {
        let s = seq("branch2(clone,2; comp(linear,64); route(transpose, comp(relu), transpose); add,2)");
        let a = align(&s, &s, &ScoringMatrix::sm0()).unwrap();
        assert_eq!(a.distance, 0.0);
        for k in 1..s.len() {
            assert_eq!(a.matrix.back(k, k), Some(Direction::Sub));
        }
        assert!(trace_back(&a).ops.is_empty());
    }

    #[test]
    fn single_substitution() {
        assert_eq!(dist("comp(relu)", "comp(identity)"), 0.5);
        assert_eq!(dist("comp(linear,32)", "comp(linear,64)"), 0.25);
    }

    #[test]
    fn enclosure_insertion_costs_opener_only() {
        assert_eq!(
            dist("comp(relu)", "route(transpose, comp(relu), transpose)"),
            1.0
        );
        assert_eq!(
            dist(
                "seq(comp(relu), comp(identity))",
                "branch2(clone,2; comp(relu); comp(identity); add,2)"
            ),
            1.0
        );
    }

    #[test]
    fn cross_type_requires_indels() {
        // A computation cannot become a routing module; the body is kept.
        assert_eq!(
            dist("comp(relu)", "route(transpose, comp(identity), transpose)"),
            1.5
        );
    }

    #[test]
    fn swapped_branches_cost_something_syntactically() {
        let d = dist(
            "branch2(clone,2; comp(linear,64); comp(identity); add,2)",
            "branch2(clone,2; comp(identity); comp(linear,64); add,2)",
        );
        assert!(d > 0.0);
    }

    #[test]
    fn transposition() {
        let a = seq("seq(comp(relu), branch4(clone,4; comp(identity); add,4))");
        let b = seq("route(im2col,2, comp(relu), col2im,2)");
        let m = ScoringMatrix::sm0();
        let ab = align(&a, &b, &m).unwrap();
        let ba = align(&b, &a, &m).unwrap();
        assert_eq!(ab.distance, ba.distance);
        assert_eq!(ab.matrix.dist, ba.matrix.transpose().dist);
    }

    #[test]
    fn start_only_sequence_is_pure_indel() {
        let start = SerialisedSequence {
            tokens: vec![Token::Start],
        };
        let s = seq("seq(comp(relu), branch4(clone,4; comp(identity); add,4))");
        let a = align(&start, &s, &ScoringMatrix::sm0()).unwrap();
        assert_eq!(a.distance, 3.0);
    }

    #[test]
    fn sm3_branch_weighted_indel() {
        let m = ScoringMatrix::preset(Preset::Sm3);
        let d = align(
            &seq("comp(relu)"),
            &seq("branch8(clone,8; comp(relu); add,8)"),
            &m,
        )
        .unwrap()
        .distance;
        assert_eq!(d, 8.0);
    }

    #[test]
    fn path_cost_matches_distance() {
        let a = parse_tree("seq(comp(softmax), branch2(clone,2; comp(relu); comp(identity); add,2))").unwrap();
        let b = parse_tree("route(transpose, seq(comp(relu), comp(linear,16)), transpose)").unwrap();
        let p = cswx_path(&a, &b, &ScoringMatrix::sm0()).unwrap();
        let sum: f64 = p.ops.iter().map(|o| o.value).sum();
        assert_eq!(sum, p.total_cost);
        assert_eq!(p.total_cost, cswx_distance(&a, &b, &ScoringMatrix::sm0()).unwrap());
        let all = vec![true; p.ops.len()];
        assert!(p.selection_valid(&all));
        assert!(p.selection_valid(&vec![false; p.ops.len()]));
    }
}
