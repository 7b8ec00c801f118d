use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grammar::DerivationTree;
use crate::scoring::ScoringMatrix;
use crate::{distance, Method};

/// Symmetric matrix of pairwise distances, stored densely.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceMatrix {
    pub n: usize,
    /// Row-major `n * n` entries.
    pub values: Vec<f64>,
    pub method: Method,
    /// Name of the scoring preset used.
    pub scoring: alloc::string::String,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Builds a matrix from the upper triangle, given row by row without the
    /// diagonal.
    pub fn from_upper(n: usize, upper: &[f64], method: Method, scoring: &str) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "{} entries do not form the upper triangle of a {n} x {n} matrix",
                upper.len()
            )));
        }
        let mut values = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                values[i * n + j] = upper[k];
                values[j * n + i] = upper[k];
                k += 1;
            }
        }
        let m = DistanceMatrix {
            n,
            values,
            method,
            scoring: scoring.into(),
        };
        m.check()?;
        Ok(m)
    }

    /// Zero diagonal, exact symmetry and finite entries.
    pub fn check(&self) -> Result<()> {
        if self.values.len() != self.n * self.n {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::InvalidArgument(format!("non-zero diagonal at {i}")));
            }
            for j in 0..self.n {
                let v = self.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is {v}")));
                }
                if v != self.get(j, i) {
                    return Err(Error::InvalidArgument(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Upper-triangle entries, row by row.
    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Computes every unordered pair once, in row-major upper-triangle order.
pub fn pairwise_distance_matrix(
    trees: &[DerivationTree],
    method: Method,
    m: &ScoringMatrix,
) -> Result<DistanceMatrix> {
    pairwise_distance_matrix_with(trees, method, m, &mut |pairs| {
        pairs
            .iter()
            .map(|&(i, j)| distance(&trees[i], &trees[j], method, m))
            .collect()
    })
}

/// As [`pairwise_distance_matrix`], with the pair evaluation delegated to
/// Evaluates a batch of index pairs, one result per pair in order.
pub type PairEvaluator<'a> = dyn FnMut(&[(usize, usize)]) -> Vec<Result<f64>> + 'a;

/// `eval`, which receives the upper-triangle pairs and returns one result
/// per pair in the same order.
pub fn pairwise_distance_matrix_with(
    trees: &[DerivationTree],
    method: Method,
    m: &ScoringMatrix,
    eval: &mut PairEvaluator<'_>,
) -> Result<DistanceMatrix> {
    let n = trees.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let results = eval(&pairs);
    let mut upper = Vec::with_capacity(pairs.len());
    for (&(i, j), r) in pairs.iter().zip(results) {
        match r {
            Ok(d) => upper.push(d),
            Err(Error::Unalignable) => return Err(Error::UnalignablePair { i, j }),
            Err(e) => return Err(e),
        }
    }
    DistanceMatrix::from_upper(n, &upper, method, m.preset.name())
}

/// Mean distance over all unordered pairs.
pub fn population_diversity(trees: &[DerivationTree], method: Method, m: &ScoringMatrix) -> Result<f64> {
    if trees.len() < 2 {
        return Err(Error::InvalidArgument(
            "diversity needs at least two trees".into(),
        ));
    }
    let upper = pairwise_distance_matrix(trees, method, m)?.upper();
    Ok(upper.iter().sum::<f64>() / upper.len() as f64)
}
