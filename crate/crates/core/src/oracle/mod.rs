//! Slow exhaustive reference implementations, used to certify the dynamic
//! programmes.
//!
//! * [`brute_force_permutation_distance`] aligns every branch-order variant
//!   of both trees with the plain aligner.
//! * [`exhaustive_edit_distance`] searches the space of grammar-valid edit
//!   scripts on token sequences directly.
//! * [`ged_sepx_path`] is an exact graph edit distance over node mappings of small
//!   architecture graphs.

mod brute_force;
mod exhaustive;
mod ged;

pub use brute_force::{brute_force_permutation_distance, MAX_BRUTE_FORCE_BRANCHES};
pub use exhaustive::{exhaustive_edit_distance, MAX_EXHAUSTIVE_TOKENS};
pub use ged::{
    ged_sepx_path, ged_sepx_path_with_abort, sepx_crossover, GraphEdit, GraphEditPath, GraphNode,
    SmallGraph, EdgeKind, MAX_GED_NODES, MAX_GRAPH_NODES,
};
