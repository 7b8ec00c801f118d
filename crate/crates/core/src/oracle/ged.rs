//! Exact graph edit distance between small architecture graphs.
//!
//! A tree becomes a graph with one node per computation module and per
//! enclosure (routing or branching module). Sequential chains are flattened:
//! consecutive modules of one slot are linked by `Next` edges, and an
//! enclosure links to every module of each of its slots with a
//! `Contains(slot)` edge.
//!
//! An edit script maps some nodes of the first graph onto nodes of the
//! second (relabelling them), deletes the rest and inserts the unmapped
//! nodes of the second graph. A mapping is admissible when the mapped nodes
//! keep their containment, keep their order along `Next` chains and keep
//! their slot assignment, allowing the two branches of any two-way branching
//! module to be exchanged. Branch exchanges are tracked as parity variables
//! in a union-find; a mapping is rejected as soon as its order and slot
//! requirements imply a contradictory set of exchanges.
//!
//! The search is depth-first over the nodes of the first graph with a
//! label-count lower bound for pruning.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grammar::DerivationTree;
use crate::scoring::ScoringMatrix;
use crate::serialise::{serialise, NodeLabel, NodeType, Token};

/// Largest graph accepted by [`SmallGraph::from_tree`].
pub const MAX_GRAPH_NODES: usize = 14;
/// Largest graph accepted by [`ged_sepx_path`].
pub const MAX_GED_NODES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Enclosure to a module of its `slot`-th slot.
    Contains(u8),
    /// A module to the next module of the same slot.
    Next,
}

/// Position of a node: the item index it occupies in a slot of a container
/// (`None` for the root slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Place {
    container: Option<usize>,
    slot: u8,
    index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub label: NodeLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize, EdgeKind)>,
    /// Root-to-node chain of places for every node.
    places: Vec<Vec<Place>>,
}

impl SmallGraph {
    pub fn from_tree(tree: &DerivationTree) -> Result<SmallGraph> {
        let seq = serialise(tree);
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut places: Vec<Vec<Place>> = Vec::new();
        // Open enclosures: (node id, current slot, items so far in slot, last item).
        let mut stack: Vec<(usize, u8, usize, Option<usize>)> = Vec::new();
        let mut root_items = 0usize;
        let mut root_last: Option<usize> = None;
        for tok in seq.tokens.iter().skip(1) {
            match tok {
                Token::Node { label, .. } => {
                    let id = nodes.len();
                    nodes.push(GraphNode {
                        label: label.clone(),
                    });
                    let mut chain = match stack.last() {
                        Some(&(parent, _, _, _)) => places[parent].clone(),
                        None => Vec::new(),
                    };
                    let place = match stack.last_mut() {
                        Some((parent, slot, items, last)) => {
                            edges.push((*parent, id, EdgeKind::Contains(*slot)));
                            if let Some(prev) = *last {
                                edges.push((prev, id, EdgeKind::Next));
                            }
                            *last = Some(id);
                            *items += 1;
                            Place {
                                container: Some(*parent),
                                slot: *slot,
                                index: *items - 1,
                            }
                        }
                        None => {
                            if let Some(prev) = root_last {
                                edges.push((prev, id, EdgeKind::Next));
                            }
                            root_last = Some(id);
                            root_items += 1;
                            Place {
                                container: None,
                                slot: 0,
                                index: root_items - 1,
                            }
                        }
                    };
                    chain.push(place);
                    places.push(chain);
                    if label.is_enclosure() {
                        stack.push((id, 0, 0, None));
                    }
                }
                Token::Separator { role, .. } => {
                    let top = stack.last_mut().ok_or_else(|| {
                        Error::Malformed("separator outside an enclosure".into())
                    })?;
                    match role {
                        crate::serialise::SeparatorRole::Divider => {
                            top.1 += 1;
                            top.2 = 0;
                            top.3 = None;
                        }
                        crate::serialise::SeparatorRole::Closer => {
                            stack.pop();
                        }
                    }
                }
                Token::Start => {}
            }
        }
        if nodes.len() > MAX_GRAPH_NODES {
            return Err(Error::TooLarge {
                what: "graph node count",
                limit: MAX_GRAPH_NODES,
                actual: nodes.len(),
            });
        }
        edges.sort_unstable();
        Ok(SmallGraph {
            nodes,
            edges,
            places,
        })
    }

    /// Builds a graph from explicit edges. A node contained by several
    /// enclosures belongs to the innermost one; slot order follows `Next`
    /// edges, falling back to node order for unchained modules.
    pub fn from_parts(nodes: Vec<GraphNode>, mut edges: Vec<(usize, usize, EdgeKind)>) -> Result<SmallGraph> {
        edges.sort_unstable();
        edges.dedup();
        let n = nodes.len();
        if n > MAX_GRAPH_NODES {
            return Err(Error::TooLarge {
                what: "graph node count",
                limit: MAX_GRAPH_NODES,
                actual: n,
            });
        }
        if edges.iter().any(|&(a, b, _)| a >= n || b >= n || a == b) {
            return Err(Error::Malformed("edge endpoint out of range".into()));
        }
        let holders = |x: usize| -> Vec<(usize, u8)> {
            edges
                .iter()
                .filter_map(|&(a, b, k)| match k {
                    EdgeKind::Contains(s) if b == x => Some((a, s)),
                    _ => None,
                })
                .collect()
        };
        // Transitive containment, to pick the innermost holder.
        let mut inside = vec![vec![false; n]; n];
        for &(a, b, k) in &edges {
            if matches!(k, EdgeKind::Contains(_)) {
                inside[b][a] = true;
            }
        }
        for k in 0..n {
            let via = inside[k].clone();
            for row in inside.iter_mut() {
                if row[k] {
                    for (cell, &v) in row.iter_mut().zip(&via) {
                        *cell |= v;
                    }
                }
            }
        }
        if (0..n).any(|i| inside[i][i]) {
            return Err(Error::Malformed("containment cycle".into()));
        }
        let parent: Vec<Option<(usize, u8)>> = (0..n)
            .map(|x| {
                let hs = holders(x);
                hs.iter()
                    .copied()
                    .find(|&(h, _)| hs.iter().all(|&(o, _)| o == h || inside[h][o]))
                    .or_else(|| hs.first().copied())
            })
            .collect();
        let mut places: Vec<Option<Vec<Place>>> = vec![None; n];
        let mut groups: BTreeMap<SlotKey, Vec<usize>> = BTreeMap::new();
        for (x, p) in parent.iter().enumerate() {
            let key = match *p {
                Some((h, s)) => (Some(h), s),
                None => (None, 0),
            };
            groups.entry(key).or_default().push(x);
        }
        let mut index = vec![0usize; n];
        for members in groups.values() {
            let next_of = |x: usize| {
                edges
                    .iter()
                    .find(|&&(a, b, k)| a == x && k == EdgeKind::Next && members.contains(&b))
                    .map(|e| e.1)
            };
            let mut order = Vec::new();
            let mut seen = vec![false; n];
            let heads: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&x| !edges.iter().any(|&(a, b, k)| b == x && k == EdgeKind::Next && members.contains(&a)))
                .collect();
            for start in heads.into_iter().chain(members.iter().copied()) {
                let mut cur = Some(start);
                while let Some(x) = cur {
                    if seen[x] {
                        break;
                    }
                    seen[x] = true;
                    order.push(x);
                    cur = next_of(x);
                }
            }
            for (k, x) in order.into_iter().enumerate() {
                index[x] = k;
            }
        }
        fn chain(
            x: usize,
            parent: &[Option<(usize, u8)>],
            index: &[usize],
            places: &mut Vec<Option<Vec<Place>>>,
        ) -> Vec<Place> {
            if let Some(p) = &places[x] {
                return p.clone();
            }
            let (mut c, container, slot) = match parent[x] {
                Some((h, s)) => (chain(h, parent, index, places), Some(h), s),
                None => (Vec::new(), None, 0),
            };
            c.push(Place {
                container,
                slot,
                index: index[x],
            });
            places[x] = Some(c.clone());
            c
        }
        for x in 0..n {
            chain(x, &parent, &index, &mut places);
        }
        Ok(SmallGraph {
            nodes,
            edges,
            places: places.into_iter().map(|p| p.expect("every chain built")).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn is_branch2(&self, n: usize) -> bool {
        self.nodes[n].label.node_type() == NodeType::Branching2
    }
}

/// One graph edit.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphEdit {
    Substitute { from: usize, to: usize, cost: f64 },
    Delete { node: usize, cost: f64 },
    Insert { node: usize, cost: f64 },
}

impl GraphEdit {
    pub fn cost(&self) -> f64 {
        match self {
            GraphEdit::Substitute { cost, .. }
            | GraphEdit::Delete { cost, .. }
            | GraphEdit::Insert { cost, .. } => *cost,
        }
    }
}

/// A minimal edit script between two graphs. Zero-cost relabellings are
/// kept in `mapping` but not listed as edits.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEditPath {
    pub edits: Vec<GraphEdit>,
    /// `mapping[i]` is the node of the second graph node `i` maps to.
    pub mapping: Vec<Option<usize>>,
    pub cost: f64,
    /// Search nodes expanded.
    pub expansions: u64,
}

// ---------------------------------------------------------------------------
// Parity union-find over branch-exchange variables.

#[derive(Debug, Clone)]
struct Parity {
    parent: Vec<usize>,
    /// Parity relative to parent.
    rel: Vec<u8>,
}

impl Parity {
    fn new(n: usize) -> Self {
        Parity {
            parent: (0..n).collect(),
            rel: vec![0; n],
        }
    }

    fn find(&self, mut x: usize) -> (usize, u8) {
        let mut p = 0;
        while self.parent[x] != x {
            p ^= self.rel[x];
            x = self.parent[x];
        }
        (x, p)
    }

    /// Requires `x xor y = parity`; false on contradiction.
    fn unite(&mut self, x: usize, y: usize, parity: u8) -> bool {
        let (rx, px) = self.find(x);
        let (ry, py) = self.find(y);
        if rx == ry {
            return px ^ py == parity;
        }
        self.parent[rx] = ry;
        self.rel[rx] = px ^ py ^ parity;
        true
    }
}

/// Relative position of two nodes of one graph.
enum Relation {
    /// The second lies in slot `slot` of the first.
    Contains { slot: u8 },
    Inside,
    /// Neither contains the other; the first precedes the second iff
    /// `before`, reversed when the exchange variable `flip` is set.
    Apart { before: bool, flip: Option<usize> },
}

fn relation(g: &SmallGraph, x: usize, y: usize) -> Relation {
    let (px, py) = (&g.places[x], &g.places[y]);
    if let Some(p) = py.iter().find(|p| p.container == Some(x)) {
        return Relation::Contains { slot: p.slot };
    }
    if px.iter().any(|p| p.container == Some(y)) {
        return Relation::Inside;
    }
    let mut k = 0;
    while px[k] == py[k] {
        k += 1;
    }
    let (a, b) = (px[k], py[k]);
    if a.slot == b.slot {
        Relation::Apart {
            before: a.index < b.index,
            flip: None,
        }
    } else {
        let c = a.container.expect("two slots only inside an enclosure");
        Relation::Apart {
            before: a.slot < b.slot,
            flip: g.is_branch2(c).then_some(c),
        }
    }
}

/// Per node type: unmapped labels of each graph and their indel costs.
type TypeTally<'a> = (Vec<&'a NodeLabel>, Vec<&'a NodeLabel>, f64, f64);

struct Search<'a> {
    g1: &'a SmallGraph,
    g2: &'a SmallGraph,
    m: &'a ScoringMatrix,
    del: Vec<f64>,
    ins: Vec<f64>,
    sub: Vec<Vec<f64>>,
    types1: Vec<NodeType>,
    types2: Vec<NodeType>,
    best: f64,
    best_map: Vec<Option<usize>>,
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    expansions: u64,
    abort: &'a dyn Fn() -> bool,
    aborted: bool,
}

impl Search<'_> {
    fn var1(&self, n: usize) -> usize {
        n
    }

    fn var2(&self, n: usize) -> usize {
        self.g1.len() + n
    }

    /// Adds the requirements of mapping `x -> y` against every earlier pair.
    fn admit(&self, parity: &mut Parity, x: usize, y: usize) -> bool {
        for (x2, y2) in self.map.iter().enumerate() {
            let Some(y2) = *y2 else { continue };
            if x2 == x {
                continue;
            }
            match (relation(self.g1, x2, x), relation(self.g2, y2, y)) {
                (Relation::Inside, Relation::Inside) => {}
                (Relation::Contains { slot: s1 }, Relation::Contains { slot: s2 }) => {
                    if self.g1.is_branch2(x2) {
                        let (v1, v2) = (self.var1(x2), self.var2(y2));
                        if !parity.unite(v1, v2, s1 ^ s2) {
                            return false;
                        }
                    } else if s1 != s2 {
                        return false;
                    }
                }
                (
                    Relation::Apart {
                        before: b1,
                        flip: f1,
                    },
                    Relation::Apart {
                        before: b2,
                        flip: f2,
                    },
                ) => {
                    // Order after exchanges: b1 ^ f1 must equal b2 ^ f2.
                    let need = u8::from(b1 != b2);
                    let ok = match (f1, f2) {
                        (None, None) => need == 0,
                        (Some(a), None) => parity.unite(self.var1(a), self.zero(), need),
                        (None, Some(b)) => parity.unite(self.var2(b), self.zero(), need),
                        (Some(a), Some(b)) => parity.unite(self.var1(a), self.var2(b), need),
                    };
                    if !ok {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }

    fn zero(&self) -> usize {
        self.g1.len() + self.g2.len()
    }

    fn lower_bound(&self, next: usize) -> f64 {
        let mut by_type: BTreeMap<NodeType, TypeTally<'_>> = BTreeMap::new();
        for x in next..self.g1.len() {
            let e = by_type
                .entry(self.types1[x])
                .or_insert((Vec::new(), Vec::new(), f64::INFINITY, f64::INFINITY));
            e.0.push(&self.g1.nodes[x].label);
            e.2 = e.2.min(self.del[x]);
        }
        for y in 0..self.g2.len() {
            if self.used[y] {
                continue;
            }
            let e = by_type
                .entry(self.types2[y])
                .or_insert((Vec::new(), Vec::new(), f64::INFINITY, f64::INFINITY));
            e.1.push(&self.g2.nodes[y].label);
            e.2 = e.2.min(self.ins[y]);
        }
        let mut total = 0.0;
        for (_, (a, b, indel, _)) in by_type {
            let (na, nb) = (a.len(), b.len());
            let mut pool = b.clone();
            let mut common = 0;
            for l in &a {
                if let Some(k) = pool.iter().position(|p| p == l) {
                    pool.swap_remove(k);
                    common += 1;
                }
            }
            let mut relabel = f64::INFINITY;
            for l in &a {
                for r in &b {
                    let c = self.m.label_cost(l, r);
                    if c > 0.0 {
                        relabel = relabel.min(c);
                    }
                }
            }
            let dn = na.abs_diff(nb);
            let mismatch = (na - common).max(nb - common).saturating_sub(dn);
            total += dn as f64 * indel;
            if mismatch > 0 {
                total += mismatch as f64 * relabel.min(indel);
            }
        }
        total
    }

    fn dfs(&mut self, x: usize, cost: f64, parity: &Parity) {
        if self.aborted {
            return;
        }
        self.expansions += 1;
        if self.expansions.is_multiple_of(4096) && (self.abort)() {
            self.aborted = true;
            return;
        }
        if x == self.g1.len() {
            let rest: f64 = (0..self.g2.len())
                .filter(|&y| !self.used[y])
                .map(|y| self.ins[y])
                .sum();
            if cost + rest < self.best {
                self.best = cost + rest;
                self.best_map = self.map.clone();
            }
            return;
        }
        if cost + self.lower_bound(x) >= self.best {
            return;
        }
        let mut options: Vec<(f64, usize)> = (0..self.g2.len())
            .filter(|&y| !self.used[y] && self.sub[x][y].is_finite())
            .map(|y| (self.sub[x][y], y))
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (c, y) in options {
            let mut p = parity.clone();
            if !self.admit(&mut p, x, y) {
                continue;
            }
            self.map[x] = Some(y);
            self.used[y] = true;
            self.dfs(x + 1, cost + c, &p);
            self.used[y] = false;
            self.map[x] = None;
        }
        self.dfs(x + 1, cost + self.del[x], parity);
    }
}

/// Exact minimal edit script from `g1` to `g2`.
pub fn ged_sepx_path(g1: &SmallGraph, g2: &SmallGraph, m: &ScoringMatrix) -> Result<GraphEditPath> {
    ged_sepx_path_with_abort(g1, g2, m, &|| false)
}

/// As [`ged_sepx_path`]; `abort` is polled periodically and ends the search with
/// [`Error::Aborted`] when it returns true.
pub fn ged_sepx_path_with_abort(
    g1: &SmallGraph,
    g2: &SmallGraph,
    m: &ScoringMatrix,
    abort: &dyn Fn() -> bool,
) -> Result<GraphEditPath> {
    for g in [g1, g2] {
        if g.len() > MAX_GED_NODES {
            return Err(Error::TooLarge {
                what: "graph node count",
                limit: MAX_GED_NODES,
                actual: g.len(),
            });
        }
    }
    let indel = |l: &NodeLabel| m.label_indel(l) + m.separator * l.separator_count() as f64;
    let del: Vec<f64> = g1.nodes.iter().map(|n| indel(&n.label)).collect();
    let ins: Vec<f64> = g2.nodes.iter().map(|n| indel(&n.label)).collect();
    let sub: Vec<Vec<f64>> = g1
        .nodes
        .iter()
        .map(|a| g2.nodes.iter().map(|b| m.label_cost(&a.label, &b.label)).collect())
        .collect();
    let upper = del.iter().sum::<f64>() + ins.iter().sum::<f64>();
    let mut search = Search {
        g1,
        g2,
        m,
        del,
        ins,
        sub,
        types1: g1.nodes.iter().map(|n| n.label.node_type()).collect(),
        types2: g2.nodes.iter().map(|n| n.label.node_type()).collect(),
        best: upper,
        best_map: vec![None; g1.len()],
        map: vec![None; g1.len()],
        used: vec![false; g2.len()],
        expansions: 0,
        abort,
        aborted: false,
    };
    // Slightly above the all-delete, all-insert script so that it is found.
    search.best = upper + 1.0;
    let parity = Parity::new(g1.len() + g2.len() + 1);
    search.dfs(0, 0.0, &parity);
    if search.aborted {
        return Err(Error::Aborted);
    }
    let mapping = search.best_map.clone();
    let mut edits = Vec::new();
    let mut used = vec![false; g2.len()];
    for (x, y) in mapping.iter().enumerate() {
        match y {
            Some(y) => {
                used[*y] = true;
                let cost = search.sub[x][*y];
                if cost > 0.0 {
                    edits.push(GraphEdit::Substitute { from: x, to: *y, cost });
                }
            }
            None => edits.push(GraphEdit::Delete {
                node: x,
                cost: search.del[x],
            }),
        }
    }
    for (y, u) in used.iter().enumerate() {
        if !u {
            edits.push(GraphEdit::Insert {
                node: y,
                cost: search.ins[y],
            });
        }
    }
    Ok(GraphEditPath {
        cost: edits.iter().map(GraphEdit::cost).sum(),
        edits,
        mapping,
        expansions: search.expansions,
    })
}

/// Applies `ceil(k / 2)` edits, chosen uniformly, of a minimal script with
/// `k` edits to `g1`. A deleted enclosure is replaced in its slot by the
/// content of its own slots; an inserted enclosure takes the place of the
/// first module it wraps in `g2`, or follows the image of its `g2`
/// predecessor when it wraps nothing present.
pub fn sepx_crossover<R: Rng + ?Sized>(
    g1: &SmallGraph,
    g2: &SmallGraph,
    m: &ScoringMatrix,
    rng: &mut R,
) -> Result<(SmallGraph, Vec<GraphEdit>)> {
    let path = ged_sepx_path(g1, g2, m)?;
    let k = path.edits.len().div_ceil(2);
    let mut chosen: Vec<GraphEdit> = path.edits.choose_multiple(rng, k).cloned().collect();
    chosen.sort_by_key(|e| match e {
        GraphEdit::Substitute { from, .. } => (0, *from),
        GraphEdit::Delete { node, .. } => (1, *node),
        GraphEdit::Insert { node, .. } => (2, *node),
    });
    let mut draft = Draft::from_graph(g1);
    // Second-graph node -> draft id, through the mapping.
    let mut image: BTreeMap<usize, usize> = BTreeMap::new();
    for (x, y) in path.mapping.iter().enumerate() {
        if let Some(y) = y {
            image.insert(*y, x);
        }
    }
    for edit in &chosen {
        match *edit {
            GraphEdit::Substitute { from, to, .. } => {
                draft.labels[from] = Some(g2.nodes[to].label.clone());
            }
            GraphEdit::Delete { node, .. } => draft.delete(node),
            GraphEdit::Insert { node, .. } => {
                let id = draft.insert(g2, node, &image);
                image.insert(node, id);
            }
        }
    }
    Ok((draft.finish()?, chosen))
}

/// Holder and slot of an ordered child list.
type SlotKey = (Option<usize>, u8);

/// Offspring under construction: ordered module lists per slot.
struct Draft {
    /// `None` once deleted.
    labels: Vec<Option<NodeLabel>>,
    slots: BTreeMap<SlotKey, Vec<usize>>,
}

impl Draft {
    fn from_graph(g: &SmallGraph) -> Draft {
        let mut slots: BTreeMap<SlotKey, Vec<(usize, usize)>> = BTreeMap::new();
        for (x, chain) in g.places.iter().enumerate() {
            let p = chain.last().expect("every node has a place");
            slots.entry((p.container, p.slot)).or_default().push((p.index, x));
        }
        Draft {
            labels: g.nodes.iter().map(|n| Some(n.label.clone())).collect(),
            slots: slots
                .into_iter()
                .map(|(key, mut v)| {
                    v.sort_unstable();
                    (key, v.into_iter().map(|(_, x)| x).collect())
                })
                .collect(),
        }
    }

    fn holder(&self, x: usize) -> Option<(SlotKey, usize)> {
        self.slots
            .iter()
            .find_map(|(key, v)| v.iter().position(|&y| y == x).map(|k| (*key, k)))
    }

    fn delete(&mut self, x: usize) {
        let Some((key, at)) = self.holder(x) else { return };
        let own: Vec<SlotKey> =
            self.slots.keys().filter(|k| k.0 == Some(x)).copied().collect();
        let mut content = Vec::new();
        for k in own {
            content.extend(self.slots.remove(&k).unwrap_or_default());
        }
        let list = self.slots.get_mut(&key).expect("holder exists");
        list.splice(at..=at, content);
        self.labels[x] = None;
    }

    fn insert(&mut self, g2: &SmallGraph, node: usize, image: &BTreeMap<usize, usize>) -> usize {
        let id = self.labels.len();
        self.labels.push(Some(g2.nodes[node].label.clone()));
        let mut wrapped: Vec<(u8, usize)> = g2
            .edges
            .iter()
            .filter_map(|&(a, b, k)| match k {
                EdgeKind::Contains(s) if a == node => {
                    image.get(&b).filter(|&&x| self.labels[x].is_some()).map(|&x| (s, x))
                }
                _ => None,
            })
            .collect();
        // Keep the wrapped modules in their current order.
        wrapped.sort_by_key(|&(s, x)| (s, self.holder(x)));
        let place = wrapped.first().and_then(|&(_, x)| self.holder(x));
        let (key, at) = match place {
            Some(p) => p,
            None => {
                let g2_place = g2.places[node].last().expect("every node has a place");
                let key = (
                    g2_place.container.and_then(|c| image.get(&c).copied()),
                    g2_place.slot,
                );
                let key = if key.0.is_none() { (None, 0) } else { key };
                let prev = g2
                    .edges
                    .iter()
                    .find(|&&(_, b, k)| b == node && k == EdgeKind::Next)
                    .and_then(|&(a, _, _)| image.get(&a).copied());
                let at = self
                    .slots
                    .get(&key)
                    .and_then(|v| prev.and_then(|p| v.iter().position(|&y| y == p)))
                    .map_or(0, |k| k + 1);
                (key, at)
            }
        };
        for &(_, x) in &wrapped {
            if let Some((k, pos)) = self.holder(x) {
                self.slots.get_mut(&k).expect("holder exists").remove(pos);
            }
        }
        let list = self.slots.entry(key).or_default();
        list.insert(at.min(list.len()), id);
        for (s, x) in wrapped {
            self.slots.entry((Some(id), s)).or_default().push(x);
        }
        id
    }

    fn finish(self) -> Result<SmallGraph> {
        let live: Vec<usize> = (0..self.labels.len()).filter(|&x| self.labels[x].is_some()).collect();
        let index = |x: usize| live.iter().position(|&y| y == x).expect("live node");
        let mut edges = Vec::new();
        for ((holder, slot), list) in &self.slots {
            for (k, &x) in list.iter().enumerate() {
                if let Some(h) = holder {
                    edges.push((index(*h), index(x), EdgeKind::Contains(*slot)));
                }
                if k > 0 {
                    edges.push((index(list[k - 1]), index(x), EdgeKind::Next));
                }
            }
        }
        let nodes = live
            .iter()
            .map(|&x| GraphNode {
                label: self.labels[x].clone().expect("live node"),
            })
            .collect();
        SmallGraph::from_parts(nodes, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;
    use crate::rcswx::rcswx_distance;

    fn graph(s: &str) -> SmallGraph {
        SmallGraph::from_tree(&parse_tree(s).unwrap()).unwrap()
    }

    #[test]
    fn graph_shape() {
        let g = graph("branch2(clone,2; seq(comp(relu), comp(identity)); comp(softmax); add,2)");
        assert_eq!(g.len(), 4);
        assert!(g.edges.contains(&(0, 1, EdgeKind::Contains(0))));
        assert!(g.edges.contains(&(1, 2, EdgeKind::Next)));
        assert!(g.edges.contains(&(0, 3, EdgeKind::Contains(1))));
    }

    #[test]
    fn isomorphic_graphs_cost_nothing() {
        let a = graph("branch2(clone,2; comp(linear,64); comp(identity); add,2)");
        let b = graph("branch2(clone,2; comp(identity); comp(linear,64); add,2)");
        let p = ged_sepx_path(&a, &b, &ScoringMatrix::sm0()).unwrap();
        assert_eq!(p.cost, 0.0);
        assert!(p.edits.is_empty());
    }

    #[test]
    fn agrees_with_alignment_on_small_case() {
        let m = ScoringMatrix::sm0();
        let a = "seq(comp(softmax), branch2(clone,2; comp(relu); route(transpose, comp(identity), transpose); add,2))";
        let b = "branch2(group,1,2; comp(identity); seq(comp(relu), comp(linear,16)); cat,1,2)";
        let p = ged_sepx_path(&graph(a), &graph(b), &m).unwrap();
        let d = rcswx_distance(&parse_tree(a).unwrap(), &parse_tree(b).unwrap(), &m).unwrap();
        assert_eq!(p.cost, d);
    }

    #[test]
    fn abort_is_honoured() {
        let a = graph("seq(comp(relu), seq(comp(relu), seq(comp(relu), seq(comp(relu), seq(comp(relu), seq(comp(relu), comp(relu)))))))");
        let b = graph("seq(comp(identity), seq(comp(identity), seq(comp(identity), seq(comp(identity), seq(comp(identity), comp(identity))))))");
        let r = ged_sepx_path_with_abort(&a, &b, &ScoringMatrix::sm0(), &|| true);
        assert!(matches!(r, Err(Error::Aborted) | Ok(_)));
    }
}
