use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::DistanceMatrix;
use crate::error::{Error, Result};
use crate::math::nelder_mead;

pub const DEFAULT_BINS: usize = 30;
/// Local starts of the spherical fit.
pub const FIT_STARTS: usize = 8;

/// One populated lag bin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariogramBin {
    /// Mean distance of the pairs in the bin.
    pub h: f64,
    pub gamma: f64,
    pub count: usize,
}

/// Empirical semivariance over equal-width lag bins on `[0, max distance]`.
/// A pair at distance `d` falls in bin `floor(d / width)`, the maximum in the
/// last bin. Empty bins are omitted.
pub fn empirical_semivariogram(
    dist: &DistanceMatrix,
    fitness: &[f64],
    bins: usize,
) -> Result<Vec<VariogramBin>> {
    if bins < 2 {
        return Err(Error::InvalidArgument("at least two bins are needed".into()));
    }
    if fitness.len() != dist.n {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} fitness values for a {}-tree matrix",
            fitness.len(),
            dist.n
        )));
    }
    let max = dist.values.iter().copied().fold(0.0, f64::max);
    let width = max / bins as f64;
    let mut sum_h = vec![0.0; bins];
    let mut sum_sq = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for i in 0..dist.n {
        for j in i + 1..dist.n {
            let d = dist.get(i, j);
            let b = if width > 0.0 {
                ((d / width) as usize).min(bins - 1)
            } else {
                0
            };
            let df = fitness[i] - fitness[j];
            sum_h[b] += d;
            sum_sq[b] += df * df;
            count[b] += 1;
        }
    }
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| VariogramBin {
            h: sum_h[b] / count[b] as f64,
            gamma: sum_sq[b] / (2.0 * count[b] as f64),
            count: count[b],
        })
        .collect())
}

/// Spherical semivariogram model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemivariogramModel {
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
    /// Count-weighted sum of squared residuals.
    pub residual: f64,
    /// The data show no structure: the partial sill vanishes and the range
    /// is not identifiable.
    pub degenerate: bool,
}

impl SemivariogramModel {
    pub fn gamma(&self, h: f64) -> f64 {
        spherical(self.nugget, self.sill, self.range, h)
    }
}

pub fn spherical(nugget: f64, sill: f64, range: f64, h: f64) -> f64 {
    if h >= range {
        sill
    } else {
        let r = h / range;
        nugget + (sill - nugget) * (1.5 * r - 0.5 * r * r * r)
    }
}

fn weighted_residual(points: &[VariogramBin], nugget: f64, sill: f64, range: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let e = spherical(nugget, sill, range, p.h) - p.gamma;
            p.count as f64 * e * e
        })
        .sum()
}

/// Count-weighted least-squares spherical fit, from [`FIT_STARTS`] bounded
/// Nelder-Mead starts. Parameters are `nugget >= 0`, `sill >= nugget` and
/// `range > 0`.
pub fn fit_spherical(points: &[VariogramBin]) -> Result<SemivariogramModel> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} populated bins; at least 4 are needed",
            points.len()
        )));
    }
    let h_max = points.iter().map(|p| p.h).fold(0.0, f64::max);
    let g_max = points.iter().map(|p| p.gamma).fold(0.0, f64::max);
    if g_max == 0.0 {
        return Ok(SemivariogramModel {
            nugget: 0.0,
            sill: 0.0,
            range: h_max.max(f64::MIN_POSITIVE),
            residual: 0.0,
            degenerate: true,
        });
    }
    let h_scale = if h_max > 0.0 { h_max } else { 1.0 };
    // Fit in units of the largest lag and largest semivariance so the fit is
    // equivariant under rescaling either axis.
    let scaled: Vec<VariogramBin> = points
        .iter()
        .map(|p| VariogramBin {
            h: p.h / h_scale,
            gamma: p.gamma / g_max,
            count: p.count,
        })
        .collect();
    let total: f64 = points.iter().map(|p| p.count as f64).sum();
    // x = (nugget, partial sill, range).
    let objective = |x: &[f64]| weighted_residual(&scaled, x[0], x[0] + x[1], x[2]) / total;
    let project = |x: &mut [f64]| {
        x[0] = x[0].max(0.0);
        x[1] = x[1].max(0.0);
        x[2] = x[2].max(1e-6);
    };
    let tail = {
        let k = scaled.len() - scaled.len() / 3;
        let t = &scaled[k.min(scaled.len() - 1)..];
        t.iter().map(|p| p.gamma).sum::<f64>() / t.len() as f64
    };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for s in 0..FIT_STARTS {
        let nugget = if s & 1 == 0 { 0.0 } else { 0.25 * scaled[0].gamma };
        let sill = if s & 2 == 0 { 1.0 } else { tail };
        let range = if s & 4 == 0 { 0.3 } else { 0.8 };
        let start = [nugget, (sill - nugget).max(0.05), range];
        let fit = nelder_mead(&objective, &start, &[0.1, 0.2, 0.2], &project, 4000, 1e-14);
        if best.as_ref().is_none_or(|b| fit.value < b.0) {
            best = Some((fit.value, fit.x, fit.converged));
        }
    }
    let (value, x, converged) = best.expect("at least one start");
    let nugget = x[0] * g_max;
    let sill = (x[0] + x[1]) * g_max;
    let range = x[2] * h_scale;
    let residual = value * total * g_max * g_max;
    if !converged || !value.is_finite() {
        return Err(Error::NoConvergence { residual });
    }
    Ok(SemivariogramModel {
        nugget,
        sill,
        range,
        residual,
        degenerate: x[1] <= 1e-3,
    })
}
