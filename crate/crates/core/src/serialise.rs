//! Bracketed token sequences for derivation trees.
//!
//! Every non-sequential module emits one node token carrying its terminals.
//! Routing and wide branching modules enclose their body and close with a
//! separator; two-way branching modules emit a divider between the two
//! branches and a closer after the second. Sequential modules emit nothing:
//! their children follow one another and are re-nested to the right on the
//! way back.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::grammar::{right_nested, DerivationTree, ModuleKind, Node, Symbol, Terminal};

/// Terminal payload of a node token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeLabel {
    Computation(Terminal),
    Routing {
        pre: Terminal,
        post: Terminal,
    },
    Branching {
        factor: u8,
        branch: Terminal,
        aggregate: Terminal,
    },
}

/// Coarse token type; substitutions across types are never allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    Computation,
    Routing,
    /// Two-way branching: two separators.
    Branching2,
    /// Four- or eight-way branching: one separator.
    BranchingWide,
}

impl NodeLabel {
    pub fn node_type(&self) -> NodeType {
        match self {
            NodeLabel::Computation(_) => NodeType::Computation,
            NodeLabel::Routing { .. } => NodeType::Routing,
            NodeLabel::Branching { factor: 2, .. } => NodeType::Branching2,
            NodeLabel::Branching { .. } => NodeType::BranchingWide,
        }
    }

    pub fn is_enclosure(&self) -> bool {
        !matches!(self, NodeLabel::Computation(_))
    }

    /// Number of separators the enclosure owns.
    pub fn separator_count(&self) -> usize {
        match self.node_type() {
            NodeType::Computation => 0,
            NodeType::Branching2 => 2,
            _ => 1,
        }
    }

    /// Module kind this label came from.
    pub fn module_kind(&self) -> ModuleKind {
        match self {
            NodeLabel::Computation(_) => ModuleKind::Computation,
            NodeLabel::Routing { .. } => ModuleKind::Routing,
            NodeLabel::Branching { factor, .. } => ModuleKind::Branching(*factor),
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeLabel::Computation(op) => write!(f, "comp({op})"),
            NodeLabel::Routing { pre, post } => write!(f, "route({pre} | {post})"),
            NodeLabel::Branching {
                factor,
                branch,
                aggregate,
            } => write!(f, "branch{factor}({branch} | {aggregate})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SeparatorRole {
    /// Between the two branches of a two-way branching module.
    Divider,
    /// Ends an enclosure.
    Closer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Token {
    /// Anchors every alignment; always position 0.
    Start,
    Node {
        /// Id of the module in the source tree.
        id: u32,
        label: NodeLabel,
    },
    Separator {
        /// Index of the owning node token.
        opener: usize,
        role: SeparatorRole,
    },
}

impl Token {
    pub fn label(&self) -> Option<&NodeLabel> {
        match self {
            Token::Node { label, .. } => Some(label),
            _ => None,
        }
    }

    pub fn is_separator(&self) -> bool {
        matches!(self, Token::Separator { .. })
    }

    pub fn is_opener(&self) -> bool {
        self.label().is_some_and(NodeLabel::is_enclosure)
    }
}

/// Matching structure of one enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub opener: usize,
    pub divider: Option<usize>,
    pub closer: usize,
}

impl Span {
    /// Separator indices, in order.
    pub fn separators(&self) -> impl Iterator<Item = usize> {
        self.divider.into_iter().chain(core::iter::once(self.closer))
    }

    /// Token ranges (exclusive bounds) of the slots: one for wide branching
    /// and routing, two for two-way branching.
    pub fn slots(&self) -> Vec<(usize, usize)> {
        match self.divider {
            Some(d) => alloc::vec![(self.opener + 1, d), (d + 1, self.closer)],
            None => alloc::vec![(self.opener + 1, self.closer)],
        }
    }
}

/// A serialised tree. Position 0 is always [`Token::Start`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SerialisedSequence {
    pub tokens: Vec<Token>,
}

impl SerialisedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token count excluding the start token.
    pub fn node_count(&self) -> usize {
        self.tokens.len().saturating_sub(1)
    }

    pub fn get(&self, i: usize) -> Option<&Token> {
        self.tokens.get(i)
    }

    /// Checks bracket structure and returns the span of every opener, indexed
    /// by token position (`None` for non-openers).
    pub fn spans(&self) -> Result<Vec<Option<Span>>> {
        if self.tokens.first() != Some(&Token::Start) {
            return Err(Error::Malformed("sequence must begin with the start token".into()));
        }
        let mut spans: Vec<Option<Span>> = alloc::vec![None; self.tokens.len()];
        // (opener, separators still expected)
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for (i, tok) in self.tokens.iter().enumerate().skip(1) {
            match tok {
                Token::Start => {
                    return Err(Error::Malformed(format!("start token at position {i}")))
                }
                Token::Node { label, .. } => {
                    if label.is_enclosure() {
                        stack.push((i, label.separator_count()));
                        spans[i] = Some(Span {
                            opener: i,
                            divider: None,
                            closer: 0,
                        });
                    }
                }
                Token::Separator { opener, role } => {
                    let Some(&mut (top, ref mut remaining)) = stack.last_mut() else {
                        return Err(Error::Malformed(format!("unmatched separator at {i}")));
                    };
                    if *opener != top {
                        return Err(Error::Malformed(format!(
                            "separator at {i} names opener {opener}, innermost open is {top}"
                        )));
                    }
                    let expected = if *remaining == 1 {
                        SeparatorRole::Closer
                    } else {
                        SeparatorRole::Divider
                    };
                    if *role != expected {
                        return Err(Error::Malformed(format!(
                            "separator at {i} should be a {expected:?}"
                        )));
                    }
                    let span = spans[top].as_mut().expect("opener span");
                    *remaining -= 1;
                    if *role == SeparatorRole::Divider {
                        span.divider = Some(i);
                    } else {
                        span.closer = i;
                        stack.pop();
                    }
                }
            }
        }
        if let Some((open, _)) = stack.last() {
            return Err(Error::Malformed(format!("enclosure at {open} is never closed")));
        }
        Ok(spans)
    }

    /// Tab-separated dump, one token per line: index, variant, payload.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            let (variant, payload) = match tok {
                Token::Start => ("start", String::new()),
                Token::Node { id, label } => ("node", format!("{label} #{id}")),
                Token::Separator { opener, role } => (
                    "separator",
                    format!(
                        "{} of {opener}",
                        match role {
                            SeparatorRole::Divider => "divider",
                            SeparatorRole::Closer => "closer",
                        }
                    ),
                ),
            };
            out.push_str(&format!("{i}\t{variant}\t{payload}\n"));
        }
        out
    }
}

/// Serialises a tree. Trees that break the grammar may produce sequences
/// that [`deserialise`] rejects.
pub fn serialise(tree: &DerivationTree) -> SerialisedSequence {
    let mut tokens = alloc::vec![Token::Start];
    emit(&tree.root, &mut tokens);
    SerialisedSequence { tokens }
}

fn term(n: &Node, i: usize) -> Terminal {
    n.children
        .get(i)
        .and_then(Node::as_terminal)
        .cloned()
        .unwrap_or_else(|| Terminal::new(crate::grammar::Category::Computation, "?", &[]))
}

fn emit(n: &Node, out: &mut Vec<Token>) {
    let Symbol::Module(kind) = &n.symbol else {
        return;
    };
    match kind {
        ModuleKind::Sequential => {
            for c in &n.children {
                emit(c, out);
            }
        }
        ModuleKind::Computation => out.push(Token::Node {
            id: n.id,
            label: NodeLabel::Computation(term(n, 0)),
        }),
        ModuleKind::Routing => {
            let opener = out.len();
            out.push(Token::Node {
                id: n.id,
                label: NodeLabel::Routing {
                    pre: term(n, 0),
                    post: term(n, 2),
                },
            });
            if let Some(body) = n.children.get(1) {
                emit(body, out);
            }
            out.push(Token::Separator {
                opener,
                role: SeparatorRole::Closer,
            });
        }
        ModuleKind::Branching(factor) => {
            let opener = out.len();
            let two = *factor == 2;
            out.push(Token::Node {
                id: n.id,
                label: NodeLabel::Branching {
                    factor: *factor,
                    branch: term(n, 0),
                    aggregate: term(n, if two { 3 } else { 2 }),
                },
            });
            if let Some(first) = n.children.get(1) {
                emit(first, out);
            }
            if two {
                out.push(Token::Separator {
                    opener,
                    role: SeparatorRole::Divider,
                });
                if let Some(second) = n.children.get(2) {
                    emit(second, out);
                }
            }
            out.push(Token::Separator {
                opener,
                role: SeparatorRole::Closer,
            });
        }
    }
}

/// Rebuilds a tree from a token sequence. Consecutive modules are nested to
/// the right in sequential modules; node ids are reassigned.
pub fn deserialise(seq: &SerialisedSequence) -> Result<DerivationTree> {
    let spans = seq.spans()?;
    let root = build(seq, &spans, 1, seq.tokens.len())?;
    Ok(DerivationTree::new(root))
}

/// Builds the module covering tokens `[lo, hi)`.
fn build(seq: &SerialisedSequence, spans: &[Option<Span>], lo: usize, hi: usize) -> Result<Node> {
    let mut items = Vec::new();
    let mut i = lo;
    while i < hi {
        match &seq.tokens[i] {
            Token::Node { label, .. } => match label {
                NodeLabel::Computation(op) => {
                    items.push(Node::computation(op.clone()));
                    i += 1;
                }
                NodeLabel::Routing { pre, post } => {
                    let span = spans[i].expect("span of opener");
                    let body = build(seq, spans, i + 1, span.closer)?;
                    items.push(Node::routing(pre.clone(), body, post.clone()));
                    i = span.closer + 1;
                }
                NodeLabel::Branching {
                    factor,
                    branch,
                    aggregate,
                } => {
                    let span = spans[i].expect("span of opener");
                    if let Some(d) = span.divider {
                        let left = build(seq, spans, i + 1, d)?;
                        let right = build(seq, spans, d + 1, span.closer)?;
                        items.push(Node::branching2(
                            branch.clone(),
                            left,
                            right,
                            aggregate.clone(),
                        ));
                    } else {
                        let body = build(seq, spans, i + 1, span.closer)?;
                        items.push(Node::branching(
                            *factor,
                            branch.clone(),
                            body,
                            aggregate.clone(),
                        ));
                    }
                    i = span.closer + 1;
                }
            },
            other => {
                return Err(Error::Malformed(format!(
                    "unexpected {} at position {i}",
                    match other {
                        Token::Start => "start token".to_string(),
                        _ => "separator".to_string(),
                    }
                )))
            }
        }
    }
    right_nested(items).ok_or_else(|| {
        Error::Malformed(format!("empty module between positions {lo} and {hi}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;

    #[test]
    fn skip_connection_layout() {
        let t = parse_tree("branch2(clone,2; comp(linear,64); comp(identity); add,2)").unwrap();
        let s = serialise(&t);
        assert_eq!(s.len(), 6);
        assert_eq!(s.tokens[0], Token::Start);
        assert_eq!(s.tokens[1].label().unwrap().node_type(), NodeType::Branching2);
        assert!(matches!(
            s.tokens[3],
            Token::Separator {
                opener: 1,
                role: SeparatorRole::Divider
            }
        ));
        assert!(matches!(
            s.tokens[5],
            Token::Separator {
                opener: 1,
                role: SeparatorRole::Closer
            }
        ));
        let spans = s.spans().unwrap();
        assert_eq!(
            spans[1],
            Some(Span {
                opener: 1,
                divider: Some(3),
                closer: 5
            })
        );
    }

    #[test]
    fn sequential_emits_no_token() {
        let t = parse_tree("seq(comp(relu), seq(comp(identity), comp(softmax)))").unwrap();
        let s = serialise(&t);
        assert_eq!(s.len(), 4);
        assert_eq!(deserialise(&s).unwrap(), t);
    }

    #[test]
    fn left_nesting_normalises_to_right() {
        let t = parse_tree("seq(seq(comp(relu), comp(identity)), comp(softmax))").unwrap();
        let back = deserialise(&serialise(&t)).unwrap();
        assert_eq!(
            crate::grammar::render_tree(&back),
            "seq(comp(relu), seq(comp(identity), comp(softmax)))"
        );
    }

    #[test]
    fn rejects_malformed() {
        let t = parse_tree("route(transpose, comp(relu), transpose)").unwrap();
        let mut s = serialise(&t);
        s.tokens.pop();
        assert!(matches!(deserialise(&s), Err(Error::Malformed(_))));
        let mut s = serialise(&t);
        s.tokens.remove(2);
        assert!(matches!(deserialise(&s), Err(Error::Malformed(_))));
    }

    #[test]
    fn dump_lists_every_token() {
        let t = parse_tree("branch4(clone,4; comp(relu); add,4)").unwrap();
        let d = serialise(&t).dump();
        assert_eq!(d.lines().count(), 4);
        assert!(d.lines().nth(3).unwrap().starts_with("3\tseparator\t"));
    }
}
