//! Empty-space and nearest-neighbour distance curves and the J-function
//! estimate J = (1 - G)/(1 - F), reliable only while F <= 0.85.
//!
//! Border correction is minus-sampling on the square (reference locations and
//! included points within distance r of the boundary are dropped at radius
//! r); the torus needs no correction.

use serde::{Deserialize, Serialize};

use super::{Result, StatsError};
use crate::geometry::{DomainKind, Point};

/// F is treated as reliable for the J ratio only up to this value.
pub const F_RELIABILITY_CAP: f64 = 0.85;

/// Reference-location grid resolution for the empty-space function.
pub const DEFAULT_REF_GRID: usize = 128;

/// Number of radii produced by `default_r_grid`.
pub const DEFAULT_R_POINTS: usize = 64;

/// A gridded statistical curve. `j_hat`/`ln_j` are present only where
/// F <= 0.85; `sd_j` is populated by `average_curves`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub r: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub j_hat: Vec<Option<f64>>,
    pub ln_j: Vec<Option<f64>>,
    pub sd_j: Vec<Option<f64>>,
    pub draws: u32,
}

fn domain_diameter(domain: DomainKind) -> f64 {
    match domain {
        DomainKind::Circle => 0.5,
        DomainKind::Square => std::f64::consts::SQRT_2,
        DomainKind::Torus => std::f64::consts::SQRT_2 / 2.0,
    }
}

fn check_r_grid(r_grid: &[f64], domain: DomainKind) -> Result<()> {
    if r_grid.is_empty() {
        return Err(StatsError::EmptyInput("r_grid"));
    }
    if r_grid[0] < 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StatsError::BadRadiusGrid);
    }
    if *r_grid.last().unwrap() > domain_diameter(domain) + 1e-12 {
        return Err(StatsError::BadRadiusGrid);
    }
    Ok(())
}

/// Bucketed nearest-point queries on the unit square / torus.
pub(crate) struct NearestGrid<'a> {
    pts: &'a [Point],
    g: i64,
    periodic: bool,
    buckets: Vec<Vec<u32>>,
}

impl<'a> NearestGrid<'a> {
    pub fn new(pts: &'a [Point], periodic: bool) -> Self {
        let g = ((pts.len() as f64).sqrt().ceil() as i64).max(1);
        let mut buckets = vec![Vec::new(); (g * g) as usize];
        for (i, p) in pts.iter().enumerate() {
            let bx = ((p.x * g as f64) as i64).clamp(0, g - 1);
            let by = ((p.y * g as f64) as i64).clamp(0, g - 1);
            buckets[(by * g + bx) as usize].push(i as u32);
        }
        NearestGrid {
            pts,
            g,
            periodic,
            buckets,
        }
    }

    fn dist(&self, a: Point, b: Point) -> f64 {
        if self.periodic {
            let dx = (a.x - b.x).abs();
            let dx = dx.min(1.0 - dx);
            let dy = (a.y - b.y).abs();
            let dy = dy.min(1.0 - dy);
            (dx * dx + dy * dy).sqrt()
        } else {
            a.dist(b)
        }
    }

    /// Distance from `q` to the nearest stored point, optionally excluding
    /// one index. Expanding ring search over buckets.
    pub fn nearest_dist(&self, q: Point, exclude: Option<u32>) -> f64 {
        let g = self.g;
        let cell = 1.0 / g as f64;
        let bx = ((q.x * g as f64) as i64).clamp(0, g - 1);
        let by = ((q.y * g as f64) as i64).clamp(0, g - 1);
        let mut best = f64::INFINITY;
        let max_ring = if self.periodic { g / 2 + 1 } else { g };
        for k in 0..=max_ring {
            if best.is_finite() && (k as f64 - 1.0) * cell > best {
                break;
            }
            let mut visit = |x: i64, y: i64| {
                let (x, y) = if self.periodic {
                    (x.rem_euclid(g), y.rem_euclid(g))
                } else {
                    if x < 0 || x >= g || y < 0 || y >= g {
                        return;
                    }
                    (x, y)
                };
                for &i in &self.buckets[(y * g + x) as usize] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d = self.dist(q, self.pts[i as usize]);
                    if d < best {
                        best = d;
                    }
                }
            };
            if k == 0 {
                visit(bx, by);
            } else {
                for d in -k..=k {
                    visit(bx + d, by - k);
                    visit(bx + d, by + k);
                }
                for d in (-k + 1)..k {
                    visit(bx - k, by + d);
                    visit(bx + k, by + d);
                }
            }
        }
        best
    }
}

fn boundary_margin(p: Point) -> f64 {
    p.x.min(1.0 - p.x).min(p.y).min(1.0 - p.y)
}

/// Empirical distribution from (distance, minus-sampling margin) pairs; the
/// margin is +inf when no border correction applies. A running maximum keeps
/// the curve nondecreasing where minus-sampling thins the reference set.
fn minus_sampled_cdf(pairs: &[(f64, f64)], r_grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(r_grid.len());
    let mut running = 0.0_f64;
    for &r in r_grid {
        let mut hits = 0usize;
        let mut denom = 0usize;
        for &(d, m) in pairs {
            if m >= r {
                denom += 1;
                if d <= r {
                    hits += 1;
                }
            }
        }
        let v = if denom == 0 {
            1.0
        } else {
            hits as f64 / denom as f64
        };
        running = running.max(v);
        out.push(running);
    }
    out
}

/// F estimate on a reference grid of `ref_grid` x `ref_grid` locations.
pub fn empty_space_f_with_grid(
    points: &[Point],
    r_grid: &[f64],
    domain: DomainKind,
    ref_grid: usize,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(StatsError::EmptyInput("points"));
    }
    check_r_grid(r_grid, domain)?;
    let periodic = domain == DomainKind::Torus;
    let grid = NearestGrid::new(points, periodic);
    let mut pairs = Vec::with_capacity(ref_grid * ref_grid);
    for iy in 0..ref_grid {
        for ix in 0..ref_grid {
            let q = Point::new(
                (ix as f64 + 0.5) / ref_grid as f64,
                (iy as f64 + 0.5) / ref_grid as f64,
            );
            let d = grid.nearest_dist(q, None);
            let m = if periodic {
                f64::INFINITY
            } else {
                boundary_margin(q)
            };
            pairs.push((d, m));
        }
    }
    Ok(minus_sampled_cdf(&pairs, r_grid))
}

pub fn empty_space_f(points: &[Point], r_grid: &[f64], domain: DomainKind) -> Result<Vec<f64>> {
    empty_space_f_with_grid(points, r_grid, domain, DEFAULT_REF_GRID)
}

/// Nearest-neighbour distance distribution over the included points.
pub fn nn_distance_g(
    points: &[Point],
    r_grid: &[f64],
    domain: DomainKind,
    included_ids: &[u32],
) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: points.len(),
        });
    }
    if included_ids.is_empty() {
        return Err(StatsError::EmptyInput("included_ids"));
    }
    check_r_grid(r_grid, domain)?;
    let periodic = domain == DomainKind::Torus;
    let grid = NearestGrid::new(points, periodic);
    let mut pairs = Vec::with_capacity(included_ids.len());
    for &id in included_ids {
        let p = points[id as usize];
        let d = grid.nearest_dist(p, Some(id));
        let m = if periodic {
            f64::INFINITY
        } else {
            boundary_margin(p)
        };
        pairs.push((d, m));
    }
    Ok(minus_sampled_cdf(&pairs, r_grid))
}

/// Combine F and G estimates into a curve with the J ratio masked by the
/// reliability cap.
pub fn j_estimate(r_grid: &[f64], f_hat: &[f64], g_hat: &[f64]) -> Result<CurveData> {
    if r_grid.len() != f_hat.len() || r_grid.len() != g_hat.len() {
        return Err(StatsError::GridMismatch);
    }
    let mut j_hat = Vec::with_capacity(r_grid.len());
    let mut ln_j = Vec::with_capacity(r_grid.len());
    for i in 0..r_grid.len() {
        if f_hat[i] <= F_RELIABILITY_CAP {
            let j = (1.0 - g_hat[i]) / (1.0 - f_hat[i]);
            j_hat.push(Some(j));
            ln_j.push(if j > 0.0 { Some(j.ln()) } else { None });
        } else {
            j_hat.push(None);
            ln_j.push(None);
        }
    }
    Ok(CurveData {
        r: r_grid.to_vec(),
        f_hat: f_hat.to_vec(),
        g_hat: g_hat.to_vec(),
        j_hat,
        ln_j,
        sd_j: vec![None; r_grid.len()],
        draws: 1,
    })
}

/// Pointwise average of curves sharing one grid; the J mask becomes the
/// intersection of the input masks and `sd_j` the sample deviation of J.
pub fn average_curves(curves: &[CurveData]) -> Result<CurveData> {
    let first = curves.first().ok_or(StatsError::EmptyInput("curves"))?;
    if curves.iter().any(|c| c.r != first.r) {
        return Err(StatsError::GridMismatch);
    }
    let k = curves.len() as f64;
    let len = first.r.len();
    let mut f_hat = vec![0.0; len];
    let mut g_hat = vec![0.0; len];
    let mut j_hat = Vec::with_capacity(len);
    let mut ln_j = Vec::with_capacity(len);
    let mut sd_j = Vec::with_capacity(len);
    for i in 0..len {
        for c in curves {
            f_hat[i] += c.f_hat[i] / k;
            g_hat[i] += c.g_hat[i] / k;
        }
        let js: Option<Vec<f64>> = curves.iter().map(|c| c.j_hat[i]).collect();
        match js {
            Some(js) => {
                let mean = js.iter().sum::<f64>() / k;
                let sd = if js.len() > 1 {
                    (js.iter().map(|j| (j - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
                } else {
                    0.0
                };
                j_hat.push(Some(mean));
                ln_j.push(if mean > 0.0 { Some(mean.ln()) } else { None });
                sd_j.push(Some(sd));
            }
            None => {
                j_hat.push(None);
                ln_j.push(None);
                sd_j.push(None);
            }
        }
    }
    Ok(CurveData {
        r: first.r.clone(),
        f_hat,
        g_hat,
        j_hat,
        ln_j,
        sd_j,
        draws: curves.iter().map(|c| c.draws).sum(),
    })
}

/// 64 equally spaced radii from 0 to the smallest r where a pilot F reaches
/// the reliability cap.
pub fn default_r_grid(points: &[Point], domain: DomainKind) -> Result<Vec<f64>> {
    let diameter = domain_diameter(domain);
    let pilot: Vec<f64> = (1..=256).map(|i| diameter * i as f64 / 256.0).collect();
    let f = empty_space_f_with_grid(points, &pilot, domain, 64)?;
    let r_cap = pilot
        .iter()
        .zip(&f)
        .find(|(_, &v)| v >= F_RELIABILITY_CAP)
        .map(|(&r, _)| r)
        .unwrap_or(diameter);
    Ok((0..DEFAULT_R_POINTS)
        .map(|i| r_cap * i as f64 / (DEFAULT_R_POINTS - 1) as f64)
        .collect())
}
