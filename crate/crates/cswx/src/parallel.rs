//! Multi-threaded distance matrices.

use cswx_core::analysis::{pairwise_distance_matrix_with, DistanceMatrix};
use cswx_core::{distance, DerivationTree, Method, Result, ScoringMatrix};
use rayon::prelude::*;

/// Same result as the sequential matrix, bit for bit: every unordered pair
/// is computed once by one worker and written to its own slot.
pub fn par_distance_matrix(trees: &[DerivationTree], method: Method, m: &ScoringMatrix) -> Result<DistanceMatrix> {
    pairwise_distance_matrix_with(trees, method, m, &mut |pairs| {
        pairs
            .par_iter()
            .map(|&(i, j)| distance(&trees[i], &trees[j], method, m))
            .collect()
    })
}

/// Mean pairwise distance, computed in parallel.
pub fn par_population_diversity(trees: &[DerivationTree], method: Method, m: &ScoringMatrix) -> Result<f64> {
    if trees.len() < 2 {
        return Err(cswx_core::Error::InvalidArgument(
            "diversity needs at least two trees".into(),
        ));
    }
    let upper = par_distance_matrix(trees, method, m)?.upper();
    Ok(upper.iter().sum::<f64>() / upper.len() as f64)
}
