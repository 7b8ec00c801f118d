//! The architecture grammar: derivation trees, the terminal registry, the
//! canonical text format, sampling and mutation.
//!
//! Production rules (one module non-terminal `M`):
//!
//! ```text
//! M -> Sequential(M M)
//!    | Branching(2)(B M M A)
//!    | Branching(4|8)(B M A)
//!    | Routing(P M Q)
//!    | Computation(C)
//! ```
//!
//! Text format, whitespace-insensitive between tokens:
//!
//! ```text
//! tree := comp(op) | seq(tree, tree) | route(op, tree, op)
//!       | branch2(op; tree; tree; op) | branch4(op; tree; op) | branch8(op; tree; op)
//! op   := name [, int]*
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, ParseError, ParseErrorKind, Result};

/// Terminal categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Category {
    Branching,
    Aggregation,
    PreRouting,
    PostRouting,
    Computation,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Branching => "branching",
            Category::Aggregation => "aggregation",
            Category::PreRouting => "pre-routing",
            Category::PostRouting => "post-routing",
            Category::Computation => "computation",
        }
    }
}

/// A terminal operation with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Terminal {
    pub category: Category,
    pub name: String,
    pub params: Vec<u32>,
}

impl Terminal {
    pub fn new(category: Category, name: &str, params: &[u32]) -> Self {
        Terminal {
            category,
            name: name.to_string(),
            params: params.to_vec(),
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for p in &self.params {
            write!(f, ",{p}")?;
        }
        Ok(())
    }
}

/// Module non-terminals. `Branching` carries its branch factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModuleKind {
    Sequential,
    Branching(u8),
    Routing,
    Computation,
}

impl ModuleKind {
    /// Expected child symbols, in order.
    fn expected_children(self) -> Option<&'static [Slot]> {
        use Slot::*;
        Some(match self {
            ModuleKind::Sequential => &[Module, Module],
            ModuleKind::Branching(2) => &[
                Op(Category::Branching),
                Module,
                Module,
                Op(Category::Aggregation),
            ],
            ModuleKind::Branching(4) | ModuleKind::Branching(8) => {
                &[Op(Category::Branching), Module, Op(Category::Aggregation)]
            }
            ModuleKind::Branching(_) => return None,
            ModuleKind::Routing => &[Op(Category::PreRouting), Module, Op(Category::PostRouting)],
            ModuleKind::Computation => &[Op(Category::Computation)],
        })
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleKind::Sequential => f.write_str("Sequential"),
            ModuleKind::Branching(k) => write!(f, "Branching({k})"),
            ModuleKind::Routing => f.write_str("Routing"),
            ModuleKind::Computation => f.write_str("Computation"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Module,
    Op(Category),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Symbol {
    Module(ModuleKind),
    Terminal(Terminal),
}

/// A derivation tree node. Leaves are terminals, internal nodes are modules.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Node {
    pub id: u32,
    pub symbol: Symbol,
    pub children: Vec<Node>,
}

impl Node {
    pub fn terminal(t: Terminal) -> Self {
        Node {
            id: 0,
            symbol: Symbol::Terminal(t),
            children: Vec::new(),
        }
    }

    pub fn module(kind: ModuleKind, children: Vec<Node>) -> Self {
        Node {
            id: 0,
            symbol: Symbol::Module(kind),
            children,
        }
    }

    pub fn computation(op: Terminal) -> Self {
        Node::module(ModuleKind::Computation, vec![Node::terminal(op)])
    }

    pub fn sequential(a: Node, b: Node) -> Self {
        Node::module(ModuleKind::Sequential, vec![a, b])
    }

    pub fn routing(pre: Terminal, body: Node, post: Terminal) -> Self {
        Node::module(
            ModuleKind::Routing,
            vec![Node::terminal(pre), body, Node::terminal(post)],
        )
    }

    pub fn branching2(branch: Terminal, left: Node, right: Node, aggregate: Terminal) -> Self {
        Node::module(
            ModuleKind::Branching(2),
            vec![
                Node::terminal(branch),
                left,
                right,
                Node::terminal(aggregate),
            ],
        )
    }

    pub fn branching(factor: u8, branch: Terminal, body: Node, aggregate: Terminal) -> Self {
        Node::module(
            ModuleKind::Branching(factor),
            vec![Node::terminal(branch), body, Node::terminal(aggregate)],
        )
    }

    pub fn module_kind(&self) -> Option<ModuleKind> {
        match self.symbol {
            Symbol::Module(k) => Some(k),
            Symbol::Terminal(_) => None,
        }
    }

    pub fn as_terminal(&self) -> Option<&Terminal> {
        match &self.symbol {
            Symbol::Terminal(t) => Some(t),
            Symbol::Module(_) => None,
        }
    }

    /// Module depth: a computation module has depth 1; terminals count 0.
    pub fn depth(&self) -> usize {
        match self.symbol {
            Symbol::Terminal(_) => 0,
            Symbol::Module(_) => 1 + self.children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }

    fn node_count(&self) -> usize {
        1 + self.children.iter().map(Node::node_count).sum::<usize>()
    }

    fn get(&self, path: &[usize]) -> &Node {
        path.iter().fold(self, |n, &i| &n.children[i])
    }

    fn get_mut(&mut self, path: &[usize]) -> &mut Node {
        path.iter().fold(self, |n, &i| &mut n.children[i])
    }
}

/// The genotype: a derivation tree rooted at a module.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivationTree {
    pub root: Node,
}

impl DerivationTree {
    /// Wraps `root` and assigns preorder node ids.
    pub fn new(root: Node) -> Self {
        let mut tree = DerivationTree { root };
        tree.renumber();
        tree
    }

    pub fn renumber(&mut self) {
        fn go(n: &mut Node, next: &mut u32) {
            n.id = *next;
            *next += 1;
            for c in &mut n.children {
                go(c, next);
            }
        }
        let mut next = 0;
        go(&mut self.root, &mut next);
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Paths (child-index lists) of every module node, in preorder.
    pub fn module_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        collect_paths(&self.root, &mut Vec::new(), &mut out, &|n| {
            n.module_kind().is_some()
        });
        out
    }

    /// Paths of every terminal node, in preorder.
    pub fn terminal_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        collect_paths(&self.root, &mut Vec::new(), &mut out, &|n| {
            n.as_terminal().is_some()
        });
        out
    }

    pub fn node_at(&self, path: &[usize]) -> &Node {
        self.root.get(path)
    }

    /// Replaces the subtree at `path`; ids are reassigned.
    pub fn replace_subtree(&mut self, path: &[usize], subtree: Node) {
        *self.root.get_mut(path) = subtree;
        self.renumber();
    }

    /// Number of two-way branching modules.
    pub fn branch2_count(&self) -> usize {
        fn go(n: &Node) -> usize {
            let own = usize::from(n.module_kind() == Some(ModuleKind::Branching(2)));
            own + n.children.iter().map(go).sum::<usize>()
        }
        go(&self.root)
    }

    /// Swaps the two branches of the two-way branching modules selected by
    /// `mask` (bit `i` addresses the `i`-th such module in preorder).
    pub fn swap_branches(&self, mask: u64) -> DerivationTree {
        fn go(n: &mut Node, counter: &mut u32, mask: u64) {
            if n.module_kind() == Some(ModuleKind::Branching(2)) {
                let idx = *counter;
                *counter += 1;
                if idx < 64 && mask >> idx & 1 == 1 {
                    n.children.swap(1, 2);
                }
            }
            for c in &mut n.children {
                go(c, counter, mask);
            }
        }
        let mut out = self.clone();
        let mut counter = 0;
        go(&mut out.root, &mut counter, mask);
        out.renumber();
        out
    }

    /// A representative of the functional equivalence class: sequential
    /// nesting flattened and two-way branches ordered by their own canonical
    /// text.
    pub fn canonical_form(&self) -> String {
        fn go(n: &Node, out: &mut String) {
            match &n.symbol {
                Symbol::Terminal(t) => out.push_str(&t.to_string()),
                Symbol::Module(ModuleKind::Sequential) => {
                    let mut items = Vec::new();
                    flatten_seq(n, &mut items);
                    out.push('[');
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            out.push(' ');
                        }
                        go(item, out);
                    }
                    out.push(']');
                }
                Symbol::Module(ModuleKind::Branching(2)) => {
                    let mut left = String::new();
                    let mut right = String::new();
                    go(&n.children[1], &mut left);
                    go(&n.children[2], &mut right);
                    if right < left {
                        core::mem::swap(&mut left, &mut right);
                    }
                    out.push_str("b2(");
                    go(&n.children[0], out);
                    out.push('|');
                    out.push_str(&left);
                    out.push('|');
                    out.push_str(&right);
                    out.push('|');
                    go(&n.children[3], out);
                    out.push(')');
                }
                Symbol::Module(kind) => {
                    out.push_str(&format!("{kind}("));
                    for (i, c) in n.children.iter().enumerate() {
                        if i > 0 {
                            out.push('|');
                        }
                        go(c, out);
                    }
                    out.push(')');
                }
            }
        }
        fn flatten_seq<'a>(n: &'a Node, items: &mut Vec<&'a Node>) {
            if n.module_kind() == Some(ModuleKind::Sequential) {
                for c in &n.children {
                    flatten_seq(c, items);
                }
            } else {
                items.push(n);
            }
        }
        let mut out = String::new();
        // A sequential root and a single-item root flatten to the same list.
        let mut items = Vec::new();
        flatten_seq(&self.root, &mut items);
        out.push('[');
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            go(item, &mut out);
        }
        out.push(']');
        out
    }
}

impl fmt::Display for DerivationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_tree(self))
    }
}

impl core::str::FromStr for DerivationTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(parse_tree(s)?)
    }
}

fn collect_paths(
    n: &Node,
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    pred: &dyn Fn(&Node) -> bool,
) {
    if pred(n) {
        out.push(path.clone());
    }
    for (i, c) in n.children.iter().enumerate() {
        path.push(i);
        collect_paths(c, path, out, pred);
        path.pop();
    }
}

// ---------------------------------------------------------------------------
// Registry

/// One registered terminal operation: its category, name and the admissible
/// values for each hyperparameter position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpSpec {
    pub category: Category,
    pub name: String,
    pub params: Vec<Vec<u32>>,
}

impl OpSpec {
    pub fn new(category: Category, name: &str, params: &[&[u32]]) -> Self {
        OpSpec {
            category,
            name: name.to_string(),
            params: params.iter().map(|p| p.to_vec()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// The terminal registry. Branching and aggregation operations carry the
/// branch factor as their last hyperparameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    pub ops: Vec<OpSpec>,
}

impl Default for Registry {
    fn default() -> Self {
        use Category::*;
        const FACTORS: &[u32] = &[2, 4, 8];
        Registry {
            ops: vec![
                OpSpec::new(Branching, "clone", &[FACTORS]),
                OpSpec::new(Branching, "group", &[&[1], FACTORS]),
                OpSpec::new(Aggregation, "add", &[FACTORS]),
                OpSpec::new(Aggregation, "cat", &[&[1], FACTORS]),
                OpSpec::new(PreRouting, "im2col", &[&[2, 4]]),
                OpSpec::new(PreRouting, "transpose", &[]),
                OpSpec::new(PostRouting, "col2im", &[&[2, 4]]),
                OpSpec::new(PostRouting, "transpose", &[]),
                OpSpec::new(Computation, "linear", &[&[16, 32, 64, 128]]),
                OpSpec::new(Computation, "relu", &[]),
                OpSpec::new(Computation, "identity", &[]),
                OpSpec::new(Computation, "pos-enc", &[]),
                OpSpec::new(Computation, "softmax", &[]),
            ],
        }
    }
}

impl Registry {
    pub fn lookup(&self, category: Category, name: &str) -> Option<&OpSpec> {
        self.ops
            .iter()
            .find(|o| o.category == category && o.name == name)
    }

    pub fn in_category(&self, category: Category) -> impl Iterator<Item = &OpSpec> {
        self.ops.iter().filter(move |o| o.category == category)
    }

    /// Every concrete terminal of `category`; for branching and aggregation
    /// only those consistent with `factor`.
    pub fn instances(&self, category: Category, factor: Option<u32>) -> Vec<Terminal> {
        let mut out = Vec::new();
        for spec in self.in_category(category) {
            let mut combos: Vec<Vec<u32>> = vec![Vec::new()];
            for (pos, values) in spec.params.iter().enumerate() {
                let last = pos + 1 == spec.params.len();
                let mut next = Vec::new();
                for combo in &combos {
                    for &v in values {
                        if last && factor.is_some_and(|k| k != v) {
                            continue;
                        }
                        let mut c = combo.clone();
                        c.push(v);
                        next.push(c);
                    }
                }
                combos = next;
            }
            if factor.is_some() && spec.params.is_empty() {
                continue;
            }
            for params in combos {
                out.push(Terminal {
                    category,
                    name: spec.name.clone(),
                    params,
                });
            }
        }
        out
    }

    fn sample_terminal<R: Rng + ?Sized>(
        &self,
        category: Category,
        factor: Option<u32>,
        rng: &mut R,
    ) -> Terminal {
        let specs: Vec<&OpSpec> = self
            .in_category(category)
            .filter(|s| match factor {
                None => true,
                Some(k) => s.params.last().is_some_and(|v| v.contains(&k)),
            })
            .collect();
        let spec = specs
            .choose(rng)
            .expect("registry has no operation for a required category");
        let n = spec.params.len();
        let params = spec
            .params
            .iter()
            .enumerate()
            .map(|(i, values)| match factor {
                Some(k) if i + 1 == n => k,
                _ => *values.choose(rng).expect("empty hyperparameter value set"),
            })
            .collect();
        Terminal {
            category,
            name: spec.name.clone(),
            params,
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration

/// Probabilities of each expansion of the module non-terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionWeights {
    pub sequential: f64,
    pub branching2: f64,
    pub branching4: f64,
    pub branching8: f64,
    pub routing: f64,
    pub computation: f64,
}

impl ExpansionWeights {
    pub fn as_array(&self) -> [(ModuleKind, f64); 6] {
        [
            (ModuleKind::Sequential, self.sequential),
            (ModuleKind::Branching(2), self.branching2),
            (ModuleKind::Branching(4), self.branching4),
            (ModuleKind::Branching(8), self.branching8),
            (ModuleKind::Routing, self.routing),
            (ModuleKind::Computation, self.computation),
        ]
    }

    /// Only sequential and computation expansions.
    pub fn branch_free() -> Self {
        ExpansionWeights {
            sequential: 0.5,
            branching2: 0.0,
            branching4: 0.0,
            branching8: 0.0,
            routing: 0.0,
            computation: 0.5,
        }
    }
}

impl Default for ExpansionWeights {
    fn default() -> Self {
        // Placeholder weights; the expected offspring count per expansion is 1.
        ExpansionWeights {
            sequential: 0.25,
            branching2: 0.15,
            branching4: 0.05,
            branching8: 0.05,
            routing: 0.10,
            computation: 0.40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrammarConfig {
    pub weights: ExpansionWeights,
    pub max_depth: usize,
    pub registry: Registry,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            weights: ExpansionWeights::default(),
            max_depth: 6,
            registry: Registry::default(),
        }
    }
}

impl GrammarConfig {
    pub fn with_max_depth(max_depth: usize) -> Self {
        GrammarConfig {
            max_depth,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
        }
        let w = self.weights.as_array();
        if w.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "expansion weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = w.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "expansion weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Validation

/// One broken grammar rule, located by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Arity {
        node: u32,
        kind: ModuleKind,
        expected: usize,
        found: usize,
    },
    Category {
        node: u32,
        position: usize,
        expected: &'static str,
        found: String,
    },
    UnknownOp {
        node: u32,
        category: Category,
        name: String,
    },
    Hyperparams {
        node: u32,
        op: String,
        detail: String,
    },
    BranchFactor {
        node: u32,
        factor: u8,
    },
    TerminalRoot,
    DuplicateId(u32),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Arity {
                node,
                kind,
                expected,
                found,
            } => write!(
                f,
                "node {node}: {kind} needs {expected} children, has {found}"
            ),
            Violation::Category {
                node,
                position,
                expected,
                found,
            } => write!(
                f,
                "node {node}: child {position} should be {expected}, found {found}"
            ),
            Violation::UnknownOp {
                node,
                category,
                name,
            } => write!(f, "node {node}: unknown {} op `{name}`", category.name()),
            Violation::Hyperparams { node, op, detail } => {
                write!(f, "node {node}: bad hyperparameters for `{op}`: {detail}")
            }
            Violation::BranchFactor { node, factor } => {
                write!(f, "node {node}: unsupported branch factor {factor}")
            }
            Violation::TerminalRoot => f.write_str("root must be a module"),
            Violation::DuplicateId(id) => write!(f, "duplicate node id {id}"),
        }
    }
}

/// Checks every production rule against the default registry.
pub fn validate(tree: &DerivationTree) -> core::result::Result<(), Vec<Violation>> {
    validate_with(tree, &Registry::default())
}

pub fn validate_with(
    tree: &DerivationTree,
    registry: &Registry,
) -> core::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if tree.root.module_kind().is_none() {
        violations.push(Violation::TerminalRoot);
    }
    validate_node(&tree.root, registry, &mut violations);
    let mut ids = Vec::with_capacity(tree.node_count());
    fn ids_of(n: &Node, out: &mut Vec<u32>) {
        out.push(n.id);
        for c in &n.children {
            ids_of(c, out);
        }
    }
    ids_of(&tree.root, &mut ids);
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            violations.push(Violation::DuplicateId(w[0]));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn describe(n: &Node) -> String {
    match &n.symbol {
        Symbol::Module(k) => format!("module {k}"),
        Symbol::Terminal(t) => format!("{} op `{}`", t.category.name(), t.name),
    }
}

fn validate_node(n: &Node, registry: &Registry, out: &mut Vec<Violation>) {
    match &n.symbol {
        Symbol::Terminal(t) => {
            if !n.children.is_empty() {
                out.push(Violation::Arity {
                    node: n.id,
                    kind: ModuleKind::Computation,
                    expected: 0,
                    found: n.children.len(),
                });
            }
            validate_terminal(n.id, t, registry, out);
        }
        Symbol::Module(kind) => {
            let Some(expected) = kind.expected_children() else {
                if let ModuleKind::Branching(k) = kind {
                    out.push(Violation::BranchFactor {
                        node: n.id,
                        factor: *k,
                    });
                }
                return;
            };
            if expected.len() != n.children.len() {
                out.push(Violation::Arity {
                    node: n.id,
                    kind: *kind,
                    expected: expected.len(),
                    found: n.children.len(),
                });
            }
            for (position, (slot, child)) in expected.iter().zip(&n.children).enumerate() {
                let ok = match (slot, &child.symbol) {
                    (Slot::Module, Symbol::Module(_)) => true,
                    (Slot::Op(c), Symbol::Terminal(t)) => t.category == *c,
                    _ => false,
                };
                if !ok {
                    out.push(Violation::Category {
                        node: n.id,
                        position,
                        expected: match slot {
                            Slot::Module => "a module",
                            Slot::Op(c) => c.name(),
                        },
                        found: describe(child),
                    });
                }
            }
            if let ModuleKind::Branching(k) = kind {
                for child in &n.children {
                    if let Symbol::Terminal(t) = &child.symbol {
                        if matches!(t.category, Category::Branching | Category::Aggregation)
                            && t.params.last() != Some(&u32::from(*k))
                        {
                            out.push(Violation::Hyperparams {
                                node: child.id,
                                op: t.name.clone(),
                                detail: format!("last hyperparameter must equal branch factor {k}"),
                            });
                        }
                    }
                }
            }
            for child in &n.children {
                validate_node(child, registry, out);
            }
        }
    }
}

fn validate_terminal(id: u32, t: &Terminal, registry: &Registry, out: &mut Vec<Violation>) {
    let Some(spec) = registry.lookup(t.category, &t.name) else {
        out.push(Violation::UnknownOp {
            node: id,
            category: t.category,
            name: t.name.clone(),
        });
        return;
    };
    if spec.arity() != t.params.len() {
        out.push(Violation::Hyperparams {
            node: id,
            op: t.name.clone(),
            detail: format!("expected {} values, found {}", spec.arity(), t.params.len()),
        });
        return;
    }
    for (i, (v, allowed)) in t.params.iter().zip(&spec.params).enumerate() {
        if !allowed.contains(v) {
            out.push(Violation::Hyperparams {
                node: id,
                op: t.name.clone(),
                detail: format!("value {v} at position {i} not in {allowed:?}"),
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Text format

/// Canonical text of a tree.
pub fn render_tree(tree: &DerivationTree) -> String {
    let mut out = String::new();
    render_node(&tree.root, &mut out);
    out
}

fn render_node(n: &Node, out: &mut String) {
    let term = |i: usize| -> String {
        n.children
            .get(i)
            .and_then(Node::as_terminal)
            .map(|t| t.to_string())
            .unwrap_or_else(|| "?".into())
    };
    match &n.symbol {
        Symbol::Terminal(t) => out.push_str(&t.to_string()),
        Symbol::Module(ModuleKind::Computation) => {
            out.push_str("comp(");
            out.push_str(&term(0));
            out.push(')');
        }
        Symbol::Module(ModuleKind::Sequential) => {
            out.push_str("seq(");
            render_node(&n.children[0], out);
            out.push_str(", ");
            render_node(&n.children[1], out);
            out.push(')');
        }
        Symbol::Module(ModuleKind::Routing) => {
            out.push_str("route(");
            out.push_str(&term(0));
            out.push_str(", ");
            render_node(&n.children[1], out);
            out.push_str(", ");
            out.push_str(&term(2));
            out.push(')');
        }
        Symbol::Module(ModuleKind::Branching(2)) => {
            out.push_str("branch2(");
            out.push_str(&term(0));
            out.push_str("; ");
            render_node(&n.children[1], out);
            out.push_str("; ");
            render_node(&n.children[2], out);
            out.push_str("; ");
            out.push_str(&term(3));
            out.push(')');
        }
        Symbol::Module(ModuleKind::Branching(k)) => {
            out.push_str(&format!("branch{k}("));
            out.push_str(&term(0));
            out.push_str("; ");
            render_node(&n.children[1], out);
            out.push_str("; ");
            out.push_str(&term(2));
            out.push(')');
        }
    }
}

/// Parses tree text against the default registry.
pub fn parse_tree(text: &str) -> core::result::Result<DerivationTree, ParseError> {
    parse_tree_with(text, &Registry::default())
}

pub fn parse_tree_with(
    text: &str,
    registry: &Registry,
) -> core::result::Result<DerivationTree, ParseError> {
    let mut parser = Parser::new(text, registry);
    let root = parser.tree()?;
    parser.expect_end()?;
    let tree = DerivationTree::new(root);
    validate_with(&tree, registry).map_err(|v| ParseError {
        line: 1,
        column: 1,
        kind: ParseErrorKind::Invalid(v),
    })?;
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u32),
    Open,
    Close,
    Comma,
    Semi,
    End,
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    registry: &'a Registry,
    peeked: Option<(Tok, usize, usize)>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, registry: &'a Registry) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
            registry,
            peeked: None,
        }
    }

    fn err(&self, line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line, column, kind }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn lex(&mut self) -> core::result::Result<(Tok, usize, usize), ParseError> {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.bump();
        }
        let (line, column) = (self.line, self.column);
        let Some(&c) = self.chars.get(self.pos) else {
            return Ok((Tok::End, line, column));
        };
        let tok = match c {
            '(' => Tok::Open,
            ')' => Tok::Close,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            c if c.is_ascii_digit() => {
                let mut value: u64 = 0;
                while let Some(&d) = self.chars.get(self.pos).filter(|d| d.is_ascii_digit()) {
                    value = value * 10 + u64::from(d.to_digit(10).unwrap_or(0));
                    if value > u64::from(u32::MAX) {
                        return Err(self.err(
                            line,
                            column,
                            ParseErrorKind::Syntax("integer out of range".into()),
                        ));
                    }
                    self.bump();
                }
                return Ok((Tok::Int(value as u32), line, column));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = self
                    .chars
                    .get(self.pos)
                    .filter(|d| d.is_alphanumeric() || **d == '_' || **d == '-')
                {
                    s.push(d);
                    self.bump();
                }
                return Ok((Tok::Ident(s), line, column));
            }
            other => {
                return Err(self.err(
                    line,
                    column,
                    ParseErrorKind::Syntax(format!("unexpected character `{other}`")),
                ))
            }
        };
        self.bump();
        Ok((tok, line, column))
    }

    fn peek(&mut self) -> core::result::Result<&(Tok, usize, usize), ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex()?);
        }
        Ok(self.peeked.as_ref().expect("peeked"))
    }

    fn next(&mut self) -> core::result::Result<(Tok, usize, usize), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> core::result::Result<(), ParseError> {
        let (tok, line, column) = self.next()?;
        if tok == want {
            Ok(())
        } else {
            Err(self.err(
                line,
                column,
                ParseErrorKind::Syntax(format!("expected {what}, found {}", show(&tok))),
            ))
        }
    }

    fn expect_end(&mut self) -> core::result::Result<(), ParseError> {
        self.expect(Tok::End, "end of input")
    }

    fn tree(&mut self) -> core::result::Result<Node, ParseError> {
        let (tok, line, column) = self.next()?;
        let Tok::Ident(head) = tok else {
            return Err(self.err(
                line,
                column,
                ParseErrorKind::Syntax(format!("expected a module, found {}", show(&tok))),
            ));
        };
        self.expect(Tok::Open, "`(`")?;
        let node = match head.as_str() {
            "comp" => {
                let op = self.op(Category::Computation)?;
                Node::computation(op)
            }
            "seq" => {
                let a = self.tree()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.tree()?;
                Node::sequential(a, b)
            }
            "route" => {
                let pre = self.op(Category::PreRouting)?;
                self.expect(Tok::Comma, "`,`")?;
                let body = self.tree()?;
                self.expect(Tok::Comma, "`,`")?;
                let post = self.op(Category::PostRouting)?;
                Node::routing(pre, body, post)
            }
            "branch2" => {
                let bop = self.op(Category::Branching)?;
                self.expect(Tok::Semi, "`;`")?;
                let left = self.tree()?;
                self.expect(Tok::Semi, "`;`")?;
                let right = self.tree()?;
                self.expect(Tok::Semi, "`;`")?;
                let aop = self.op(Category::Aggregation)?;
                Node::branching2(bop, left, right, aop)
            }
            "branch4" | "branch8" => {
                let factor = if head == "branch4" { 4 } else { 8 };
                let bop = self.op(Category::Branching)?;
                self.expect(Tok::Semi, "`;`")?;
                let body = self.tree()?;
                self.expect(Tok::Semi, "`;`")?;
                let aop = self.op(Category::Aggregation)?;
                Node::branching(factor, bop, body, aop)
            }
            other => {
                return Err(self.err(
                    line,
                    column,
                    ParseErrorKind::Syntax(format!("unknown module `{other}`")),
                ))
            }
        };
        self.expect(Tok::Close, "`)`")?;
        Ok(node)
    }

    fn op(&mut self, category: Category) -> core::result::Result<Terminal, ParseError> {
        let (tok, line, column) = self.next()?;
        let Tok::Ident(name) = tok else {
            return Err(self.err(
                line,
                column,
                ParseErrorKind::Syntax(format!(
                    "expected {} operation, found {}",
                    category.name(),
                    show(&tok)
                )),
            ));
        };
        let mut params = Vec::new();
        loop {
            if self.peek()?.0 != Tok::Comma {
                break;
            }
            // A comma followed by an integer continues the hyperparameter list.
            let save = (self.pos, self.line, self.column, self.peeked.take());
            let (after, _, _) = self.lex()?;
            match after {
                Tok::Int(v) => params.push(v),
                _ => {
                    self.pos = save.0;
                    self.line = save.1;
                    self.column = save.2;
                    self.peeked = save.3;
                    break;
                }
            }
        }
        let Some(spec) = self.registry.lookup(category, &name) else {
            return Err(self.err(
                line,
                column,
                ParseErrorKind::UnknownOp {
                    category: category.name(),
                    name,
                },
            ));
        };
        if spec.arity() != params.len() {
            return Err(self.err(
                line,
                column,
                ParseErrorKind::Arity {
                    op: name,
                    expected: spec.arity(),
                    found: params.len(),
                },
            ));
        }
        Ok(Terminal {
            category,
            name,
            params,
        })
    }
}

fn show(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Open => "`(`".into(),
        Tok::Close => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semi => "`;`".into(),
        Tok::End => "end of input".into(),
    }
}

// ---------------------------------------------------------------------------
// Sampling

/// Samples a tree from the weighted grammar. Modules at `max_depth` are
/// forced to be computations.
pub fn sample_tree<R: Rng + ?Sized>(config: &GrammarConfig, rng: &mut R) -> DerivationTree {
    DerivationTree::new(sample_module(config, 1, rng))
}

fn choose_expansion<R: Rng + ?Sized>(weights: &ExpansionWeights, rng: &mut R) -> ModuleKind {
    let options = weights.as_array();
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (kind, w) in options {
        if x < w {
            return kind;
        }
        x -= w;
    }
    ModuleKind::Computation
}

fn sample_module<R: Rng + ?Sized>(config: &GrammarConfig, depth: usize, rng: &mut R) -> Node {
    let kind = if depth >= config.max_depth {
        ModuleKind::Computation
    } else {
        choose_expansion(&config.weights, rng)
    };
    build_module(config, kind, depth, rng)
}

fn build_module<R: Rng + ?Sized>(
    config: &GrammarConfig,
    kind: ModuleKind,
    depth: usize,
    rng: &mut R,
) -> Node {
    let reg = &config.registry;
    match kind {
        ModuleKind::Computation => {
            Node::computation(reg.sample_terminal(Category::Computation, None, rng))
        }
        ModuleKind::Sequential => {
            let a = sample_module(config, depth + 1, rng);
            let b = sample_module(config, depth + 1, rng);
            Node::sequential(a, b)
        }
        ModuleKind::Routing => {
            let pre = reg.sample_terminal(Category::PreRouting, None, rng);
            let body = sample_module(config, depth + 1, rng);
            let post = reg.sample_terminal(Category::PostRouting, None, rng);
            Node::routing(pre, body, post)
        }
        ModuleKind::Branching(2) => {
            let bop = reg.sample_terminal(Category::Branching, Some(2), rng);
            let left = sample_module(config, depth + 1, rng);
            let right = sample_module(config, depth + 1, rng);
            let aop = reg.sample_terminal(Category::Aggregation, Some(2), rng);
            Node::branching2(bop, left, right, aop)
        }
        ModuleKind::Branching(k) => {
            let bop = reg.sample_terminal(Category::Branching, Some(u32::from(k)), rng);
            let body = sample_module(config, depth + 1, rng);
            let aop = reg.sample_terminal(Category::Aggregation, Some(u32::from(k)), rng);
            Node::branching(k, bop, body, aop)
        }
    }
}

/// Grows a tree whose serialisation has exactly `target_tokens` tokens
/// (including the start token) by repeatedly wrapping or extending random
/// computation modules. Expansion kinds with zero weight are never used, so
/// branch-free weights give pure computation chains.
///
/// Returns `None` when no admissible expansion can hit the target exactly
/// (e.g. a target below 2).
pub fn grow_tree<R: Rng + ?Sized>(
    config: &GrammarConfig,
    target_tokens: usize,
    rng: &mut R,
) -> Option<DerivationTree> {
    if target_tokens < 2 {
        return None;
    }
    let reg = &config.registry;
    let w = &config.weights;
    // (kind, tokens added, weight)
    let growth: Vec<(ModuleKind, usize, f64)> = [
        (ModuleKind::Sequential, 1, w.sequential),
        (ModuleKind::Routing, 2, w.routing),
        (ModuleKind::Branching(4), 2, w.branching4),
        (ModuleKind::Branching(8), 2, w.branching8),
        (ModuleKind::Branching(2), 4, w.branching2),
    ]
    .into_iter()
    .filter(|g| g.2 > 0.0)
    .collect();
    if growth.is_empty() && target_tokens != 2 {
        return None;
    }
    'attempt: for _ in 0..64 {
        let mut root = Node::computation(reg.sample_terminal(Category::Computation, None, rng));
        let mut tokens = 2;
        while tokens < target_tokens {
            let remaining = target_tokens - tokens;
            let fits: Vec<&(ModuleKind, usize, f64)> =
                growth.iter().filter(|g| g.1 <= remaining).collect();
            if fits.is_empty() {
                continue 'attempt;
            }
            let total: f64 = fits.iter().map(|g| g.2).sum();
            let mut x = rng.gen::<f64>() * total;
            let mut pick = fits[fits.len() - 1];
            for g in &fits {
                if x < g.2 {
                    pick = g;
                    break;
                }
                x -= g.2;
            }
            let tree = DerivationTree::new(root);
            let sites: Vec<Vec<usize>> = tree
                .module_paths()
                .into_iter()
                .filter(|p| tree.node_at(p).module_kind() == Some(ModuleKind::Computation))
                .collect();
            let site = sites.choose(rng).expect("tree has a computation").clone();
            let mut root_mut = tree.root;
            let target = root_mut.get_mut(&site);
            let old = core::mem::replace(target, Node::module(ModuleKind::Sequential, Vec::new()));
            let fresh = |rng: &mut R| {
                Node::computation(reg.sample_terminal(Category::Computation, None, rng))
            };
            *target = match pick.0 {
                ModuleKind::Sequential => {
                    if rng.gen::<bool>() {
                        Node::sequential(old, fresh(rng))
                    } else {
                        Node::sequential(fresh(rng), old)
                    }
                }
                ModuleKind::Routing => Node::routing(
                    reg.sample_terminal(Category::PreRouting, None, rng),
                    old,
                    reg.sample_terminal(Category::PostRouting, None, rng),
                ),
                ModuleKind::Branching(2) => {
                    let other = fresh(rng);
                    let (l, r) = if rng.gen::<bool>() {
                        (old, other)
                    } else {
                        (other, old)
                    };
                    Node::branching2(
                        reg.sample_terminal(Category::Branching, Some(2), rng),
                        l,
                        r,
                        reg.sample_terminal(Category::Aggregation, Some(2), rng),
                    )
                }
                ModuleKind::Branching(k) => Node::branching(
                    k,
                    reg.sample_terminal(Category::Branching, Some(u32::from(k)), rng),
                    old,
                    reg.sample_terminal(Category::Aggregation, Some(u32::from(k)), rng),
                ),
                ModuleKind::Computation => unreachable!("computation is not a growth step"),
            };
            root = root_mut;
            tokens += pick.1;
        }
        return Some(DerivationTree::new(root));
    }
    None
}

// ---------------------------------------------------------------------------
// Mutation

/// Applies one local edit: either resamples a uniformly chosen module subtree
/// (respecting the depth cap from that position) or replaces one terminal by
/// another of the same category. The result always differs from the input
/// when the registry offers an alternative.
pub fn mutate<R: Rng + ?Sized>(
    tree: &DerivationTree,
    config: &GrammarConfig,
    rng: &mut R,
) -> DerivationTree {
    for _ in 0..16 {
        let candidate = if rng.gen::<bool>() {
            resample_subtree(tree, config, rng)
        } else {
            tweak_terminal(tree, config, rng)
        };
        if candidate.root != tree.root {
            return candidate;
        }
    }
    tweak_terminal(tree, config, rng)
}

fn resample_subtree<R: Rng + ?Sized>(
    tree: &DerivationTree,
    config: &GrammarConfig,
    rng: &mut R,
) -> DerivationTree {
    let paths = tree.module_paths();
    let path = paths.choose(rng).expect("root is a module");
    // Module depth of the site: count module ancestors including itself.
    let mut depth = 1;
    let mut node = &tree.root;
    for &i in path {
        node = &node.children[i];
        if node.module_kind().is_some() {
            depth += 1;
        }
    }
    let fresh = sample_module(config, depth.min(config.max_depth), rng);
    let mut out = tree.clone();
    out.replace_subtree(path, fresh);
    out
}

fn tweak_terminal<R: Rng + ?Sized>(
    tree: &DerivationTree,
    config: &GrammarConfig,
    rng: &mut R,
) -> DerivationTree {
    let mut paths = tree.terminal_paths();
    paths.shuffle(rng);
    for path in paths {
        let t = tree.node_at(&path).as_terminal().expect("terminal path").clone();
        let factor = match t.category {
            Category::Branching | Category::Aggregation => t.params.last().copied(),
            _ => None,
        };
        let options: Vec<Terminal> = config
            .registry
            .instances(t.category, factor)
            .into_iter()
            .filter(|o| *o != t)
            .collect();
        if let Some(choice) = options.choose(rng) {
            let mut out = tree.clone();
            out.replace_subtree(&path, Node::terminal(choice.clone()));
            return out;
        }
    }
    tree.clone()
}

/// Wraps `nodes` into a right-nested chain of sequential modules.
pub fn right_nested(mut nodes: Vec<Node>) -> Option<Node> {
    let mut acc = nodes.pop()?;
    while let Some(prev) = nodes.pop() {
        acc = Node::sequential(prev, acc);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SKIP: &str = "branch2(clone,2; comp(linear,64); comp(identity); add,2)";

    #[test]
    fn parses_smallest_tree() {
        let t = parse_tree("comp(identity)").unwrap();
        assert_eq!(t.root.module_kind(), Some(ModuleKind::Computation));
        assert_eq!(t.root.children[0].as_terminal().unwrap().name, "identity");
        assert_eq!(render_tree(&t), "comp(identity)");
    }

    #[test]
    fn parses_sequential() {
        let t = parse_tree("seq(comp(linear,64), comp(relu))").unwrap();
        assert_eq!(t.root.module_kind(), Some(ModuleKind::Sequential));
        assert_eq!(t.root.children.len(), 2);
        assert!(t
            .root
            .children
            .iter()
            .all(|c| c.module_kind() == Some(ModuleKind::Computation)));
    }

    #[test]
    fn parses_skip_connection() {
        let t = parse_tree(SKIP).unwrap();
        assert_eq!(t.root.module_kind(), Some(ModuleKind::Branching(2)));
        assert_eq!(t.root.children.len(), 4);
        assert_eq!(render_tree(&t), SKIP);
    }

    #[test]
    fn whitespace_is_insignificant() {
        let t = parse_tree(" route ( im2col , 2 ,\n comp(relu) , col2im,4 ) ").unwrap();
        assert_eq!(render_tree(&t), "route(im2col,2, comp(relu), col2im,4)");
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse_tree("seq(comp(relu),\n  comp(bogus))").unwrap_err();
        assert_eq!((e.line, e.column), (2, 8));
        assert!(matches!(e.kind, ParseErrorKind::UnknownOp { .. }));

        let e = parse_tree("comp(linear)").unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::Arity {
                expected: 1,
                found: 0,
                ..
            }
        ));

        let e = parse_tree("seq(comp(relu) comp(relu))").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!((e.line, e.column), (1, 16));
    }

    #[test]
    fn branch_factor_must_match_ops() {
        let e = parse_tree("branch4(clone,8; comp(relu); add,4)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(_)));
    }

    #[test]
    fn validate_reports_arity_and_category() {
        let mut t = parse_tree(SKIP).unwrap();
        t.root.children.remove(2);
        let v = validate(&t).unwrap_err();
        assert!(v.iter().any(|v| matches!(v, Violation::Arity { expected: 4, found: 3, .. })));

        let bad = DerivationTree::new(Node::module(
            ModuleKind::Computation,
            vec![Node::terminal(Terminal::new(Category::Branching, "clone", &[2]))],
        ));
        let v = validate(&bad).unwrap_err();
        assert!(v.iter().any(|v| matches!(v, Violation::Category { .. })));
    }

    #[test]
    fn depth_one_samples_are_computations() {
        let config = GrammarConfig::with_max_depth(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = sample_tree(&config, &mut rng);
            assert_eq!(t.root.module_kind(), Some(ModuleKind::Computation));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let config = GrammarConfig::default();
        let a = sample_tree(&config, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_tree(&config, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn samples_validate_and_respect_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for max_depth in 1..=7 {
            let config = GrammarConfig::with_max_depth(max_depth);
            for _ in 0..1500 {
                let t = sample_tree(&config, &mut rng);
                assert!(t.depth() <= max_depth);
                validate(&t).unwrap();
                let again = parse_tree(&render_tree(&t)).unwrap();
                assert_eq!(again, t);
            }
        }
    }

    #[test]
    fn root_expansion_frequencies_match_weights() {
        let config = GrammarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let weights = config.weights.as_array();
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let t = sample_tree(&config, &mut rng);
            let k = t.root.module_kind().unwrap();
            let idx = weights.iter().position(|(kind, _)| *kind == k).unwrap();
            counts[idx] += 1;
        }
        for ((_, p), c) in weights.iter().zip(counts) {
            let se = libm::sqrt(p * (1.0 - p) / n as f64);
            let freq = c as f64 / n as f64;
            assert!((freq - p).abs() <= 3.0 * se, "{freq} vs {p}");
        }
    }

    #[test]
    fn mutation_of_single_computation_replaces_terminal() {
        let config = GrammarConfig::with_max_depth(1);
        let t = parse_tree("comp(relu)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = mutate(&t, &config, &mut rng);
            assert_eq!(m.root.module_kind(), Some(ModuleKind::Computation));
            assert_ne!(m, t);
        }
    }

    #[test]
    fn mutation_is_deterministic_and_valid() {
        let config = GrammarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let t = sample_tree(&config, &mut rng);
            let m = mutate(&t, &config, &mut rng);
            validate(&m).unwrap();
        }
        let t = parse_tree(SKIP).unwrap();
        let a = mutate(&t, &config, &mut ChaCha8Rng::seed_from_u64(1));
        let b = mutate(&t, &config, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }

    #[test]
    fn swaps_and_canonical_form() {
        let t = parse_tree(SKIP).unwrap();
        let s = t.swap_branches(1);
        assert_eq!(
            render_tree(&s),
            "branch2(clone,2; comp(identity); comp(linear,64); add,2)"
        );
        assert_eq!(s.canonical_form(), t.canonical_form());
        let a = parse_tree("seq(seq(comp(relu), comp(identity)), comp(softmax))").unwrap();
        let b = parse_tree("seq(comp(relu), seq(comp(identity), comp(softmax)))").unwrap();
        assert_eq!(a.canonical_form(), b.canonical_form());
    }

    #[test]
    fn grow_hits_exact_token_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let config = GrammarConfig::default();
        for target in 4..60 {
            let t = grow_tree(&config, target, &mut rng).unwrap();
            validate(&t).unwrap();
            assert_eq!(crate::serialise::serialise(&t).len(), target);
        }
        let free = GrammarConfig {
            weights: ExpansionWeights::branch_free(),
            ..Default::default()
        };
        let t = grow_tree(&free, 33, &mut rng).unwrap();
        assert_eq!(t.branch2_count(), 0);
        assert_eq!(crate::serialise::serialise(&t).len(), 33);
    }
}
