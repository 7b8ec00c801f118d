//! Substitution and insertion/deletion costs over tokens.
//!
//! Costs are `f64`; an impossible substitution is `f64::INFINITY`, which
//! saturates under addition. All preset costs are dyadic rationals, so sums
//! are exact and distances come out bit-identical regardless of the order in
//! which a path is accumulated.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::serialise::{NodeLabel, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Preset {
    /// Default: graded by whether the first/last operations share a name.
    Sm0,
    /// Flat 0.5 for any non-identical same-type substitution.
    Sm1,
    /// Flat 0.5 for any same-type substitution of distinct nodes.
    Sm2,
    /// As `Sm0`, but branching nodes are weighted by their branch count.
    Sm3,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Sm0, Preset::Sm1, Preset::Sm2, Preset::Sm3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sm0 => "sm0",
            Preset::Sm1 => "sm1",
            Preset::Sm2 => "sm2",
            Preset::Sm3 => "sm3",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sm0" => Ok(Preset::Sm0),
            "sm1" => Ok(Preset::Sm1),
            "sm2" => Ok(Preset::Sm2),
            "sm3" => Ok(Preset::Sm3),
            other => Err(Error::InvalidArgument(format!(
                "unknown scoring preset `{other}` (expected sm0, sm1, sm2 or sm3)"
            ))),
        }
    }
}

/// Cost configuration. Identical nodes always cost 0 and nodes of different
/// types can never be substituted.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoringMatrix {
    pub preset: Preset,
    /// Same type, same first/last operation names, different hyperparameters.
    pub c1: f64,
    /// Same type only.
    pub c2: f64,
    /// Insertion/deletion cost of a node token.
    pub indel_default: f64,
    /// Insertion/deletion cost of a separator token.
    pub separator: f64,
    /// Branching indels cost the branch factor, and substituting branching
    /// nodes with different factors costs the factor difference.
    pub branching_weighted: bool,
}

impl Default for ScoringMatrix {
    fn default() -> Self {
        ScoringMatrix::preset(Preset::Sm0)
    }
}

impl ScoringMatrix {
    pub fn preset(preset: Preset) -> Self {
        let (c1, c2, branching_weighted) = match preset {
            Preset::Sm0 | Preset::Custom => (0.25, 0.5, false),
            Preset::Sm1 | Preset::Sm2 => (0.5, 0.5, false),
            Preset::Sm3 => (0.25, 0.5, true),
        };
        ScoringMatrix {
            preset,
            c1,
            c2,
            indel_default: 1.0,
            separator: 0.0,
            branching_weighted,
        }
    }

    pub fn sm0() -> Self {
        ScoringMatrix::preset(Preset::Sm0)
    }

    pub fn custom(
        c1: f64,
        c2: f64,
        indel_default: f64,
        separator: f64,
        branching_weighted: bool,
    ) -> Result<Self> {
        let m = ScoringMatrix {
            preset: Preset::Custom,
            c1,
            c2,
            indel_default,
            separator,
            branching_weighted,
        };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.c1, self.c2, self.indel_default, self.separator]
            .iter()
            .all(|c| c.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("scoring costs must be finite".into()));
        }
        if !(0.0 <= self.c1 && self.c1 <= self.c2) {
            return Err(Error::InvalidArgument(format!(
                "scoring costs must satisfy 0 <= c1 <= c2 (c1 = {}, c2 = {})",
                self.c1, self.c2
            )));
        }
        if self.indel_default <= 0.0 || self.separator < 0.0 {
            return Err(Error::InvalidArgument(
                "indel_default must be positive and separator non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Cost of aligning `a` against `b`. Start only matches start; separators
    /// match separators at cost 0 (the aligner decides whether the pairing is
    /// admissible); node tokens follow the preset rule.
    pub fn substitution(&self, a: &Token, b: &Token) -> f64 {
        match (a, b) {
            (Token::Start, Token::Start) => 0.0,
            (Token::Separator { role: r1, .. }, Token::Separator { role: r2, .. }) => {
                if r1 == r2 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            (Token::Node { label: x, .. }, Token::Node { label: y, .. }) => self.label_cost(x, y),
            _ => f64::INFINITY,
        }
    }

    /// Substitution rule on node labels.
    pub fn label_cost(&self, x: &NodeLabel, y: &NodeLabel) -> f64 {
        if x.node_type() != y.node_type() {
            return f64::INFINITY;
        }
        if x == y {
            return 0.0;
        }
        if self.branching_weighted {
            if let (
                NodeLabel::Branching { factor: k1, .. },
                NodeLabel::Branching { factor: k2, .. },
            ) = (x, y)
            {
                if k1 != k2 {
                    return f64::from(k1.abs_diff(*k2));
                }
            }
        }
        let (x_first, x_last) = end_names(x);
        let (y_first, y_last) = end_names(y);
        if x_first == y_first && x_last == y_last {
            self.c1
        } else {
            self.c2
        }
    }

    /// Cost of inserting or deleting `t`. The start token is never edited.
    pub fn indel(&self, t: &Token) -> f64 {
        match t {
            Token::Start => f64::INFINITY,
            Token::Separator { .. } => self.separator,
            Token::Node { label, .. } => self.label_indel(label),
        }
    }

    pub fn label_indel(&self, label: &NodeLabel) -> f64 {
        match label {
            NodeLabel::Branching { factor, .. } if self.branching_weighted => f64::from(*factor),
            _ => self.indel_default,
        }
    }
}

fn end_names(label: &NodeLabel) -> (&str, &str) {
    match label {
        NodeLabel::Computation(op) => (&op.name, &op.name),
        NodeLabel::Routing { pre, post } => (&pre.name, &post.name),
        NodeLabel::Branching {
            branch, aggregate, ..
        } => (&branch.name, &aggregate.name),
    }
}

/// One level of a node's hyperparameter sampling chain: the probabilities of
/// the available options and which option each of the two nodes took.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingLevel {
    pub probabilities: Vec<f64>,
    pub x: usize,
    pub y: usize,
}

/// Substitution cost derived from grammar sampling probabilities: every level
/// at which the two nodes chose differently contributes the product of
/// `1 - p` over that level's options. Not used by any preset; the option
/// probabilities depend on grammar weights chosen by the caller.
pub fn sampling_probability_cost(levels: &[SamplingLevel]) -> f64 {
    levels
        .iter()
        .filter(|level| level.x != level.y)
        .map(|level| level.probabilities.iter().map(|p| 1.0 - p).product::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{Category, Terminal};

    fn t(cat: Category, name: &str, params: &[u32]) -> Terminal {
        Terminal::new(cat, name, params)
    }

    fn node(label: NodeLabel) -> Token {
        Token::Node { id: 0, label }
    }

    fn branching(factor: u8, b: &str, bp: &[u32], a: &str, ap: &[u32]) -> Token {
        node(NodeLabel::Branching {
            factor,
            branch: t(Category::Branching, b, bp),
            aggregate: t(Category::Aggregation, a, ap),
        })
    }

    fn comp(name: &str, params: &[u32]) -> Token {
        node(NodeLabel::Computation(t(Category::Computation, name, params)))
    }

    #[test]
    fn sm0_branching_examples() {
        let m = ScoringMatrix::sm0();
        let b4 = branching(4, "group", &[1, 4], "cat", &[1, 4]);
        let b8 = branching(8, "group", &[1, 8], "cat", &[1, 8]);
        let b4c = branching(4, "clone", &[4], "add", &[4]);
        assert_eq!(m.substitution(&b4, &b4), 0.0);
        assert_eq!(m.substitution(&b4, &b8), 0.25);
        assert_eq!(m.substitution(&b4, &b4c), 0.5);
        assert_eq!(m.substitution(&b4, &comp("identity", &[])), f64::INFINITY);
    }

    #[test]
    fn sm3_weights_branch_counts() {
        let m = ScoringMatrix::preset(Preset::Sm3);
        let b4 = branching(4, "group", &[1, 4], "cat", &[1, 4]);
        let b8 = branching(8, "group", &[1, 8], "cat", &[1, 8]);
        let b2 = branching(2, "clone", &[2], "add", &[2]);
        assert_eq!(m.substitution(&b4, &b8), 4.0);
        assert_eq!(m.indel(&b4), 4.0);
        assert_eq!(m.indel(&b2), 2.0);
        assert_eq!(m.substitution(&b2, &b4), f64::INFINITY);
        assert_eq!(m.indel(&comp("relu", &[])), 1.0);
    }

    #[test]
    fn indels() {
        let m = ScoringMatrix::sm0();
        let sep = Token::Separator {
            opener: 1,
            role: crate::serialise::SeparatorRole::Closer,
        };
        assert_eq!(m.indel(&sep), 0.0);
        assert_eq!(m.indel(&comp("relu", &[])), 1.0);
        assert_eq!(m.indel(&Token::Start), f64::INFINITY);
    }

    #[test]
    fn computation_grading() {
        let m = ScoringMatrix::sm0();
        assert_eq!(m.substitution(&comp("relu", &[]), &comp("identity", &[])), 0.5);
        assert_eq!(m.substitution(&comp("linear", &[64]), &comp("linear", &[32])), 0.25);
        let m1 = ScoringMatrix::preset(Preset::Sm1);
        assert_eq!(m1.substitution(&comp("linear", &[64]), &comp("linear", &[32])), 0.5);
        assert_eq!(m1.substitution(&comp("linear", &[64]), &comp("linear", &[64])), 0.0);
    }

    #[test]
    fn custom_validation() {
        assert!(ScoringMatrix::custom(0.25, 0.5, 1.0, 0.0, false).is_ok());
        assert!(ScoringMatrix::custom(0.6, 0.5, 1.0, 0.0, false).is_err());
        assert!(ScoringMatrix::custom(0.1, 0.5, 0.0, 0.0, false).is_err());
        assert!(ScoringMatrix::custom(-0.1, 0.5, 1.0, 0.0, false).is_err());
    }

    #[test]
    fn sampling_cost_counts_differing_levels() {
        let levels = [
            SamplingLevel {
                probabilities: alloc::vec![0.5, 0.25, 0.25],
                x: 0,
                y: 0,
            },
            SamplingLevel {
                probabilities: alloc::vec![0.5, 0.5],
                x: 0,
                y: 1,
            },
        ];
        assert_eq!(sampling_probability_cost(&levels), 0.25);
    }
}
