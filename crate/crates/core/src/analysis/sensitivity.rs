use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grammar::DerivationTree;
use crate::math::{linear_fit, pearson, LinearFit};
use crate::scoring::{Preset, ScoringMatrix};
use crate::{distance, Method};

pub const MIN_SENSITIVITY_PAIRS: usize = 20;

/// One scoring matrix against the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PresetComparison {
    pub preset: Preset,
    pub pearson: f64,
    /// Least-squares line of this preset's distances on the baseline's.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub baseline: Preset,
    /// `distances[k][p]`: distance of pair `p` under matrix `k`.
    pub distances: Vec<Vec<f64>>,
    /// One entry per non-baseline matrix.
    pub comparisons: Vec<PresetComparison>,
}

/// Distances of every pair under every matrix, each compared with the first
/// matrix by Pearson correlation and a linear fit.
pub fn scoring_sensitivity(
    pairs: &[(DerivationTree, DerivationTree)],
    matrices: &[ScoringMatrix],
    method: Method,
) -> Result<SensitivityReport> {
    if pairs.len() < MIN_SENSITIVITY_PAIRS {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} pairs; at least {MIN_SENSITIVITY_PAIRS} are needed",
            pairs.len()
        )));
    }
    let Some(base) = matrices.first() else {
        return Err(Error::InvalidArgument("no scoring matrix given".into()));
    };
    let distances = matrices
        .iter()
        .map(|m| {
            pairs
                .iter()
                .map(|(a, b)| distance(a, b, method, m))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let comparisons = matrices
        .iter()
        .zip(&distances)
        .skip(1)
        .map(|(m, d)| {
            let LinearFit {
                slope,
                intercept,
                r_squared,
            } = linear_fit(&distances[0], d);
            PresetComparison {
                preset: m.preset,
                pearson: pearson(&distances[0], d),
                slope,
                intercept,
                r_squared,
            }
        })
        .collect();
    Ok(SensitivityReport {
        baseline: base.preset,
        distances,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{sample_tree, GrammarConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_against_itself() {
        let config = GrammarConfig::with_max_depth(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<_> = (0..20)
            .map(|_| (sample_tree(&config, &mut rng), sample_tree(&config, &mut rng)))
            .collect();
        let m = ScoringMatrix::sm0();
        let r = scoring_sensitivity(&pairs, &[m, m], Method::Rcswx).unwrap();
        assert!((r.comparisons[0].pearson - 1.0).abs() < 1e-12);
        assert!(scoring_sensitivity(&pairs[..5], &[ScoringMatrix::sm0()], Method::Rcswx).is_err());
    }
}
