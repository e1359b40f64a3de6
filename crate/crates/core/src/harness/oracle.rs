//! Brute-force cross-checks that recompute engine results by independent
//! means: Monte-Carlo cell areas, half-plane vertex enumeration for cell
//! geometry and adjacency, recompute-all selection weights, ANOVA
//! computational formulas, and the analytic two-disk lens area.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::aipp;
use crate::dynamics::{self, SelectionSpec};
use crate::geometry::{build_tessellation, Configuration, DomainKind, Point};
use crate::stats;

use super::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub check: String,
    pub size: usize,
    pub seed: u64,
    pub pass: bool,
    pub detail: String,
    /// Serialized worst-case instance for replay when the check fails.
    pub worst_case: Option<serde_json::Value>,
}

pub const ORACLE_CHECKS: &[&str] = &["cell-areas", "adjacency", "weights", "anova", "lens"];

/// Run the named brute-force check against the engine. `size` scales the
/// instance (point count) where applicable.
pub fn oracle(check: &str, size: usize, seed: u64) -> Result<OracleReport> {
    match check {
        "cell-areas" => cell_areas_check(size.max(4), seed),
        "adjacency" => adjacency_check(size.max(4), seed),
        "weights" => weights_check(size.max(8), seed),
        "anova" => anova_check(seed),
        "lens" => lens_check(),
        other => Err(HarnessError::Precondition(format!(
            "unknown oracle check '{other}'; expected one of {ORACLE_CHECKS:?}"
        ))),
    }
}

fn random_square_config(n: usize, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    Configuration::new(DomainKind::Square, points)
}

/// Monte-Carlo area oracle: the fraction of uniform samples whose nearest
/// generator is i estimates cell i's area. Tolerance 2e-3 at 1e6 samples.
fn cell_areas_check(n: usize, seed: u64) -> Result<OracleReport> {
    const SAMPLES: usize = 1_000_000;
    const TOL: f64 = 2e-3;
    let config = random_square_config(n, seed);
    let tess = build_tessellation(&config)?;
    let mut hits = vec![0u64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_5151);
    for _ in 0..SAMPLES {
        let q = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in config.points.iter().enumerate() {
            let d = q.dist_sq(*p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        hits[best] += 1;
    }
    let mut worst = (0usize, 0.0f64);
    for (i, cell) in tess.cells().iter().enumerate() {
        let mc = hits[i] as f64 / SAMPLES as f64;
        let err = (mc - cell.area).abs();
        if err > worst.1 {
            worst = (i, err);
        }
    }
    let pass = worst.1 <= TOL;
    Ok(OracleReport {
        check: "cell-areas".into(),
        size: n,
        seed,
        pass,
        detail: format!("max |MC - engine| = {:.3e} (tolerance {TOL:.1e})", worst.1),
        worst_case: (!pass).then(|| {
            json!({
                "points": config.points,
                "cell": worst.0,
                "error": worst.1,
            })
        }),
    })
}

/// Independent half-plane oracle by vertex enumeration: cell i is the
/// feasible region of the unit-square walls plus every bisector half-plane
/// (not just Delaunay neighbours). A generator j is adjacent iff its bisector
/// carries two distinct feasible vertices (a positive-length edge).
fn brute_force_cell(points: &[Point], i: usize) -> (f64, Vec<u32>) {
    const FEAS_EPS: f64 = 1e-9;
    const MIN_EDGE: f64 = 1e-9;
    // constraints a.x <= b: four walls then one bisector per other generator
    let mut normals: Vec<(f64, f64)> = vec![(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)];
    let mut offsets: Vec<f64> = vec![0.0, 1.0, 0.0, 1.0];
    let mut labels: Vec<Option<u32>> = vec![None; 4];
    let p = points[i];
    for (j, q) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        normals.push((q.x - p.x, q.y - p.y));
        offsets.push(0.5 * (q.x * q.x + q.y * q.y - p.x * p.x - p.y * p.y));
        labels.push(Some(j as u32));
    }
    let m = normals.len();
    let feasible = |x: f64, y: f64| {
        (0..m).all(|k| normals[k].0 * x + normals[k].1 * y <= offsets[k] + FEAS_EPS)
    };
    // all pairwise line intersections that satisfy every constraint
    let mut verts: Vec<(f64, f64, usize, usize)> = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let det = normals[a].0 * normals[b].1 - normals[a].1 * normals[b].0;
            if det.abs() < 1e-14 {
                continue;
            }
            let x = (offsets[a] * normals[b].1 - offsets[b] * normals[a].1) / det;
            let y = (normals[a].0 * offsets[b] - normals[b].0 * offsets[a]) / det;
            if feasible(x, y) {
                verts.push((x, y, a, b));
            }
        }
    }
    // convex hull area via angular sort of the distinct vertices
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &(x, y, _, _) in &verts {
        if !distinct
            .iter()
            .any(|&(u, v)| (u - x).abs() < 1e-10 && (v - y).abs() < 1e-10)
        {
            distinct.push((x, y));
        }
    }
    let cx = distinct.iter().map(|v| v.0).sum::<f64>() / distinct.len().max(1) as f64;
    let cy = distinct.iter().map(|v| v.1).sum::<f64>() / distinct.len().max(1) as f64;
    distinct.sort_by(|u, v| {
        (u.1 - cy)
            .atan2(u.0 - cx)
            .total_cmp(&(v.1 - cy).atan2(v.0 - cx))
    });
    let mut area = 0.0;
    let k = distinct.len();
    for t in 0..k {
        let (x0, y0) = distinct[t];
        let (x1, y1) = distinct[(t + 1) % k];
        area += x0 * y1 - x1 * y0;
    }
    area *= 0.5;
    // active bisectors: two distinct feasible vertices on the same line
    let mut neighbors = Vec::new();
    for (c, label) in labels.iter().enumerate() {
        let Some(j) = label else { continue };
        let on_line: Vec<(f64, f64)> = verts
            .iter()
            .filter(|v| v.2 == c || v.3 == c)
            .map(|v| (v.0, v.1))
            .collect();
        let mut max_span = 0.0f64;
        for a in 0..on_line.len() {
            for b in a + 1..on_line.len() {
                let dx = on_line[a].0 - on_line[b].0;
                let dy = on_line[a].1 - on_line[b].1;
                max_span = max_span.max((dx * dx + dy * dy).sqrt());
            }
        }
        if max_span > MIN_EDGE {
            neighbors.push(*j);
        }
    }
    neighbors.sort_unstable();
    (area, neighbors)
}

fn adjacency_check(n: usize, seed: u64) -> Result<OracleReport> {
    let config = random_square_config(n, seed);
    let tess = build_tessellation(&config)?;
    let mut mismatch: Option<(usize, Vec<u32>, Vec<u32>)> = None;
    let mut max_area_err = 0.0f64;
    for (i, cell) in tess.cells().iter().enumerate() {
        let (area, neighbors) = brute_force_cell(&config.points, i);
        max_area_err = max_area_err.max((area - cell.area).abs());
        if neighbors != cell.neighbor_ids {
            mismatch = Some((i, neighbors, cell.neighbor_ids.clone()));
            break;
        }
    }
    let pass = mismatch.is_none();
    Ok(OracleReport {
        check: "adjacency".into(),
        size: n,
        seed,
        pass,
        detail: match &mismatch {
            None => format!(
                "all {n} neighbour sets match exactly (max area gap {max_area_err:.2e})"
            ),
            Some((i, _, _)) => format!("neighbour set of cell {i} disagrees"),
        },
        worst_case: mismatch.map(|(i, oracle, engine)| {
            json!({
                "points": config.points,
                "cell": i,
                "oracle_neighbors": oracle,
                "engine_neighbors": engine,
            })
        }),
    })
}

/// Run a short chain, then recompute every selection weight from the cells
/// and diff against the incrementally maintained weight cache.
fn weights_check(n: usize, seed: u64) -> Result<OracleReport> {
    const STEPS: u64 = 200;
    const TOL: f64 = 1e-9;
    let spec = SelectionSpec::VolumePower { alpha: 1.0 };
    let mut state = dynamics::ProcessState::init_uniform(n, DomainKind::Square, spec, seed)
        .map_err(|e| HarnessError::Dynamics(e.to_string()))?;
    dynamics::evolve(&mut state, STEPS, &mut [])
        .map_err(|(e, _)| HarnessError::Dynamics(e.to_string()))?;
    let cached = state.weights().to_vec();
    let mut worst = (0usize, 0.0f64);
    for (i, cell) in state.tessellation().cells().iter().enumerate() {
        let fresh = state.selection().weight(cell);
        let err = (fresh - cached[i]).abs() / fresh.abs().max(1e-300);
        if err > worst.1 {
            worst = (i, err);
        }
    }
    let pass = worst.1 <= TOL;
    Ok(OracleReport {
        check: "weights".into(),
        size: n,
        seed,
        pass,
        detail: format!(
            "max relative weight drift after {STEPS} steps = {:.3e}",
            worst.1
        ),
        worst_case: (!pass).then(|| {
            json!({
                "points": state.tessellation().configuration().points,
                "cell": worst.0,
                "cached": cached[worst.0],
            })
        }),
    })
}

/// Recompute the ANOVA sums of squares with the classical computational
/// formulas (totals and correction term) and diff against the engine's
/// mean-deviation route. Exact to 1e-9 on a fixed dataset.
fn anova_check(seed: u64) -> Result<OracleReport> {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, k) = (3usize, 4usize, 5usize);
    let data: Vec<Vec<Vec<f64>>> = (0..a)
        .map(|i| {
            (0..b)
                .map(|j| {
                    (0..k)
                        .map(|_| (i as f64) - 0.5 * (j as f64) + rng.gen::<f64>())
                        .collect()
                })
                .collect()
        })
        .collect();
    let table = stats::edge_effect_anova(&data).map_err(|e| HarnessError::Stats(e.to_string()))?;
    let grand: f64 = data.iter().flatten().flatten().sum();
    let total_n = (a * b * k) as f64;
    let correction = grand * grand / total_n;
    let cell_total = |i: usize, j: usize| data[i][j].iter().sum::<f64>();
    let ss_a: f64 = (0..a)
        .map(|i| (0..b).map(|j| cell_total(i, j)).sum::<f64>().powi(2))
        .sum::<f64>()
        / (b * k) as f64
        - correction;
    let ss_b: f64 = (0..b)
        .map(|j| (0..a).map(|i| cell_total(i, j)).sum::<f64>().powi(2))
        .sum::<f64>()
        / (a * k) as f64
        - correction;
    let ss_cells: f64 = (0..a)
        .flat_map(|i| (0..b).map(move |j| (i, j)))
        .map(|(i, j)| cell_total(i, j).powi(2))
        .sum::<f64>()
        / k as f64
        - correction;
    let ss_ab = ss_cells - ss_a - ss_b;
    let ss_total: f64 = data
        .iter()
        .flatten()
        .flatten()
        .map(|y| y * y)
        .sum::<f64>()
        - correction;
    let ss_error = ss_total - ss_cells;
    let gaps = [
        ("ss_a", (ss_a - table.ss_a).abs()),
        ("ss_b", (ss_b - table.ss_b).abs()),
        ("ss_ab", (ss_ab - table.ss_ab).abs()),
        ("ss_error", (ss_error - table.ss_error).abs()),
        ("ss_total", (ss_total - table.ss_total).abs()),
    ];
    let worst = gaps
        .iter()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .copied()
        .unwrap();
    let pass = worst.1 <= TOL;
    Ok(OracleReport {
        check: "anova".into(),
        size: a * b * k,
        seed,
        pass,
        detail: format!("max SS gap = {:.3e} at {}", worst.1, worst.0),
        worst_case: (!pass).then(|| json!({ "data": data, "component": worst.0 })),
    })
}

/// Two overlapping disks at distance rho: union area has a closed form; the
/// quadrature used by the coverage cache must land within its stated
/// tolerance.
fn lens_check() -> Result<OracleReport> {
    use std::f64::consts::PI;
    let rho: f64 = 0.01;
    let d = rho;
    let lens =
        2.0 * rho * rho * (d / (2.0 * rho)).acos() - (d / 2.0) * (4.0 * rho * rho - d * d).sqrt();
    let want = 2.0 * PI * rho * rho - lens;
    let pts = [Point::new(0.5, 0.5), Point::new(0.5 + d, 0.5)];
    let got = aipp::coverage_area(&pts, rho, false);
    let tol = 2.0 * aipp::QUAD_TOL_FACTOR * PI * rho * rho;
    let err = (got - want).abs();
    let pass = err <= tol;
    Ok(OracleReport {
        check: "lens".into(),
        size: 2,
        seed: 0,
        pass,
        detail: format!("|quadrature - analytic| = {err:.3e} (tolerance {tol:.1e})"),
        worst_case: (!pass).then(|| json!({ "got": got, "want": want })),
    })
}
