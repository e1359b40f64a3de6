//! The statistics used to characterise stationary point patterns: Thiel's
//! redundancy, the Voronoi nearest-neighbour EPMF, F/G/J curve estimation,
//! Gamma shape fitting and the two-way ANOVA used for edge-effect checks.

mod anova;
mod curves;
mod gamma;
mod regression;
pub(crate) mod special;

pub use anova::{edge_effect_anova, AnovaTable};
pub use curves::{
    average_curves, default_r_grid, empty_space_f, j_estimate, nn_distance_g, CurveData,
};
pub use gamma::gamma_shape_mle;
pub use regression::{weighted_poly_regression, RegressionFit};

use std::collections::BTreeMap;

use crate::geometry::{GeometryError, Tessellation};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("area {0} is not strictly positive")]
    NonPositiveArea(f64),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("r grid must be increasing and within the domain diameter")]
    BadRadiusGrid,
    #[error("curves must share an identical r grid")]
    GridMismatch,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("MLE solve diverged: {0}")]
    Diverged(&'static str),
    #[error("unbalanced ANOVA design")]
    Unbalanced,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Thiel's redundancy R* = ln N + sum p_j ln p_j of the normalised areas.
/// Zero iff all areas are equal; always below ln N.
pub fn thiel_redundancy(areas: &[f64]) -> Result<f64> {
    if areas.is_empty() {
        return Err(StatsError::EmptyInput("areas"));
    }
    let mut total = 0.0;
    for &a in areas {
        if !(a > 0.0) {
            return Err(StatsError::NonPositiveArea(a));
        }
        total += a;
    }
    let n = areas.len() as f64;
    let entropy_term: f64 = areas
        .iter()
        .map(|&a| {
            let p = a / total;
            p * p.ln()
        })
        .sum();
    Ok((n.ln() + entropy_term).max(0.0))
}

/// Empirical probability mass function of the Voronoi neighbour count.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Epmf {
    pub freq: BTreeMap<usize, f64>,
    pub samples: usize,
}

impl Epmf {
    pub fn mean(&self) -> f64 {
        self.freq.iter().map(|(&n, &f)| n as f64 * f).sum()
    }

    /// Total frequency assigned to neighbour counts above `n`.
    pub fn tail_above(&self, n: usize) -> f64 {
        self.freq.iter().filter(|(&k, _)| k > n).map(|(_, &f)| f).sum()
    }
}

pub fn nn_epmf(tess: &Tessellation, included_ids: &[u32]) -> Result<Epmf> {
    if included_ids.is_empty() {
        return Err(StatsError::EmptyInput("included_ids"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &id in included_ids {
        let cell = tess.cell(id)?;
        *counts.entry(cell.neighbor_ids.len()).or_default() += 1;
    }
    let total = included_ids.len() as f64;
    Ok(Epmf {
        freq: counts
            .into_iter()
            .map(|(n, c)| (n, c as f64 / total))
            .collect(),
        samples: included_ids.len(),
    })
}

/// Labels of cells with NN-depth >= m. Monotone in m by construction.
pub fn depth_filter(tess: &Tessellation, m: u32) -> Result<Vec<u32>> {
    let depths = tess.nn_depths()?;
    Ok(depths
        .iter()
        .enumerate()
        .filter(|(_, &d)| d >= m)
        .map(|(i, _)| i as u32)
        .collect())
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value; used for
/// uniformity sanity checks on final configurations.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyInput("ks samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.total_cmp(v));
    ys.sort_by(|u, v| u.total_cmp(v));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 0.3 {
        // the alternating series is numerically useless here; Q(0.3) > 1-1e-7
        return Ok((d, 1.0));
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += term;
        sign = -sign;
        if term.abs() < 1e-12 {
            break;
        }
    }
    Ok((d, (2.0 * p).clamp(0.0, 1.0)))
}
