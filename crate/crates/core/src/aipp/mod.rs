//! The area-interaction point process on the unit square, with density
//! proportional to beta^n(x) * gamma^(-coverage(x)) where coverage(x) is the
//! area of the union of radius-rho disks centred on the points. gamma > 1 is
//! attractive, gamma < 1 repulsive. Sampling is by a spatial birth-death
//! Metropolis-Hastings chain with an incrementally maintained coverage cache,
//! plus a Robbins-Monro tuner that adjusts beta to hit a target mean count.
//!
//! gamma is supplied as (gamma1, exponent) with gamma = gamma1^exponent; all
//! arithmetic stays in log space (exponent * ln gamma1) because the nominal
//! exponent of 1e4 makes gamma itself unrepresentable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Configuration, DomainKind, Point};

/// Number of vertical slabs for the disk-union quadrature. The scheme is
/// midpoint-in-x with exact interval arithmetic in y, so the error for a
/// radius-rho disk is well under `QUAD_TOL_FACTOR * pi * rho^2` (verified
/// against the analytic two-disk lens area in the tests).
const SLABS: usize = 512;

/// Documented quadrature tolerance for a single disk-area increment,
/// as a fraction of pi * rho^2.
pub const QUAD_TOL_FACTOR: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum AippError {
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error("beta tuning failed to converge after {rounds} rounds")]
    TuneFailed { rounds: usize, trace: Vec<TuneRound> },
}

pub type Result<T> = std::result::Result<T, AippError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AippParams {
    /// Birth intensity.
    pub beta: f64,
    /// Base of the interaction parameter; gamma = gamma1^gamma_exponent.
    pub gamma1: f64,
    /// Exponent applied to gamma1 (nominally 1e4).
    pub gamma_exponent: f64,
    /// Interaction disk radius.
    pub rho: f64,
    /// Desired mean point count for beta tuning.
    pub target_count: f64,
    /// If true, coverage is clipped to the unit square instead of letting
    /// disks spill over the boundary (sensitivity-check mode).
    pub clip_coverage: bool,
}

impl AippParams {
    pub fn new(beta: f64, gamma1: f64) -> Self {
        AippParams {
            beta,
            gamma1,
            gamma_exponent: 1e4,
            rho: 0.01,
            target_count: 2000.0,
            clip_coverage: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(AippError::InvalidParams("beta must be positive"));
        }
        if !(self.gamma1 > 0.0) {
            return Err(AippError::InvalidParams("gamma1 must be positive"));
        }
        if !(self.rho > 0.0) {
            return Err(AippError::InvalidParams("rho must be positive"));
        }
        if !(self.target_count > 0.0) {
            return Err(AippError::InvalidParams("target_count must be positive"));
        }
        if !self.gamma_exponent.is_finite() {
            return Err(AippError::InvalidParams("gamma_exponent must be finite"));
        }
        Ok(())
    }

    /// ln gamma = gamma_exponent * ln gamma1; the only form gamma is used in.
    pub fn log_gamma(&self) -> f64 {
        self.gamma_exponent * self.gamma1.ln()
    }
}

/// Area of the part of the radius-`rho` disk at `u` not already covered by
/// the disks at `neighbors` (callers should pre-filter to centres within
/// 2 rho of `u`; farther disks contribute nothing). With `clip` set, both the
/// new disk and the existing ones are intersected with the unit square.
pub fn new_disk_area(u: Point, neighbors: &[Point], rho: f64, clip: bool) -> f64 {
    let mut scratch = Vec::with_capacity(neighbors.len());
    new_disk_area_with(u, neighbors, rho, clip, &mut scratch)
}

fn new_disk_area_with(
    u: Point,
    neighbors: &[Point],
    rho: f64,
    clip: bool,
    scratch: &mut Vec<(f64, f64)>,
) -> f64 {
    let rho2 = rho * rho;
    let (mut x0, mut x1) = (u.x - rho, u.x + rho);
    if clip {
        x0 = x0.max(0.0);
        x1 = x1.min(1.0);
    }
    if x1 <= x0 {
        return 0.0;
    }
    let w = (x1 - x0) / SLABS as f64;
    let mut area = 0.0;
    for m in 0..SLABS {
        let xm = x0 + (m as f64 + 0.5) * w;
        let h2 = rho2 - (xm - u.x) * (xm - u.x);
        if h2 <= 0.0 {
            continue;
        }
        let h = h2.sqrt();
        let (mut lo, mut hi) = (u.y - h, u.y + h);
        if clip {
            lo = lo.max(0.0);
            hi = hi.min(1.0);
        }
        if hi <= lo {
            continue;
        }
        // covered sub-intervals of [lo, hi] along the slab midline
        scratch.clear();
        let mut fully_covered = false;
        for p in neighbors {
            let g2 = rho2 - (xm - p.x) * (xm - p.x);
            if g2 <= 0.0 {
                continue;
            }
            let g = g2.sqrt();
            let a = (p.y - g).max(lo);
            let b = (p.y + g).min(hi);
            if a <= lo && b >= hi {
                fully_covered = true;
                break;
            }
            if b > a {
                scratch.push((a, b));
            }
        }
        if fully_covered {
            continue;
        }
        scratch.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut covered = 0.0;
        let mut reach = lo;
        for &(a, b) in scratch.iter() {
            if b > reach {
                covered += b - reach.max(a);
                reach = b;
            }
        }
        area += (hi - lo - covered) * w;
    }
    area
}

/// Coverage area of the union of radius-`rho` disks, by sequential insertion.
pub fn coverage_area(points: &[Point], rho: f64, clip: bool) -> f64 {
    let mut grid = Grid::new(rho);
    let mut nbrs = Vec::new();
    let mut scratch = Vec::new();
    let mut total = 0.0;
    for (i, &p) in points.iter().enumerate() {
        grid.neighbors(p, &points[..i], &mut nbrs);
        total += new_disk_area_with(p, &nbrs, rho, clip, &mut scratch);
        grid.insert(i as u32, p);
    }
    total
}

/// ln of the Papangelou conditional intensity lambda*(u; x) = the density
/// ratio p(x + u) / p(x) = beta * gamma^(-new area covered by u's disk).
pub fn log_papangelou(u: Point, config: &[Point], params: &AippParams) -> f64 {
    let log_gamma = params.log_gamma();
    if log_gamma == 0.0 {
        // gamma = 1: exactly ln beta, no quadrature involved
        return params.beta.ln();
    }
    let two_rho2 = 4.0 * params.rho * params.rho;
    let nbrs: Vec<Point> = config
        .iter()
        .copied()
        .filter(|p| {
            let (dx, dy) = (p.x - u.x, p.y - u.y);
            dx * dx + dy * dy < two_rho2
        })
        .collect();
    params.beta.ln() - log_gamma * new_disk_area(u, &nbrs, params.rho, params.clip_coverage)
}

/// Papangelou conditional intensity; see [`log_papangelou`].
pub fn papangelou(u: Point, config: &[Point], params: &AippParams) -> f64 {
    log_papangelou(u, config, params).exp()
}

/// Spatial hash over the unit square with bucket size rho. Disks interact
/// only within distance 2 rho, which a 5x5 bucket neighbourhood covers.
#[derive(Debug, Clone)]
struct Grid {
    rho: f64,
    dim: usize,
    buckets: Vec<Vec<u32>>,
}

impl Grid {
    fn new(rho: f64) -> Self {
        let dim = (1.0 / rho).ceil().max(1.0) as usize;
        Grid {
            rho,
            dim,
            buckets: vec![Vec::new(); dim * dim],
        }
    }

    fn coords(&self, p: Point) -> (usize, usize) {
        let clampi = |v: f64| (v.max(0.0) / self.rho) as usize;
        (
            clampi(p.x).min(self.dim - 1),
            clampi(p.y).min(self.dim - 1),
        )
    }

    fn bucket_index(&self, p: Point) -> usize {
        let (i, j) = self.coords(p);
        j * self.dim + i
    }

    fn insert(&mut self, idx: u32, p: Point) {
        let b = self.bucket_index(p);
        self.buckets[b].push(idx);
    }

    fn remove(&mut self, idx: u32, p: Point) {
        let b = self.bucket_index(p);
        let pos = self.buckets[b]
            .iter()
            .position(|&i| i == idx)
            .expect("grid entry must exist");
        self.buckets[b].swap_remove(pos);
    }

    fn relabel(&mut self, old_idx: u32, new_idx: u32, p: Point) {
        let b = self.bucket_index(p);
        let pos = self.buckets[b]
            .iter()
            .position(|&i| i == old_idx)
            .expect("grid entry must exist");
        self.buckets[b][pos] = new_idx;
    }

    /// Collect the points (from `points`) whose disks can overlap B(p, rho),
    /// i.e. centres strictly within 2 rho, excluding `p`'s own index slot if
    /// the caller filtered it out of `points` beforehand.
    fn neighbors(&self, p: Point, points: &[Point], out: &mut Vec<Point>) {
        out.clear();
        let (ci, cj) = self.coords(p);
        let two_rho2 = 4.0 * self.rho * self.rho;
        let lo_i = ci.saturating_sub(2);
        let hi_i = (ci + 2).min(self.dim - 1);
        let lo_j = cj.saturating_sub(2);
        let hi_j = (cj + 2).min(self.dim - 1);
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                for &idx in &self.buckets[j * self.dim + i] {
                    let Some(&q) = points.get(idx as usize) else {
                        continue;
                    };
                    let (dx, dy) = (q.x - p.x, q.y - p.y);
                    if dx * dx + dy * dy < two_rho2 {
                        out.push(q);
                    }
                }
            }
        }
    }

    /// Same, but skipping one point index (for death proposals).
    fn neighbors_excluding(
        &self,
        p: Point,
        points: &[Point],
        skip: u32,
        out: &mut Vec<Point>,
    ) {
        out.clear();
        let (ci, cj) = self.coords(p);
        let two_rho2 = 4.0 * self.rho * self.rho;
        let lo_i = ci.saturating_sub(2);
        let hi_i = (ci + 2).min(self.dim - 1);
        let lo_j = cj.saturating_sub(2);
        let hi_j = (cj + 2).min(self.dim - 1);
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                for &idx in &self.buckets[j * self.dim + i] {
                    if idx == skip {
                        continue;
                    }
                    let q = points[idx as usize];
                    let (dx, dy) = (q.x - p.x, q.y - p.y);
                    if dx * dx + dy * dy < two_rho2 {
                        out.push(q);
                    }
                }
            }
        }
    }
}

/// Birth-death Metropolis-Hastings chain state.
///
/// RNG draw order per step: (1) one uniform for the birth/death coin;
/// for a birth: x, y of the proposal, then the acceptance uniform;
/// for a death on a non-empty configuration: the victim index, then the
/// acceptance uniform. A death proposed on an empty configuration consumes
/// only the coin.
#[derive(Debug, Clone)]
pub struct AippState {
    pub params: AippParams,
    points: Vec<Point>,
    grid: Grid,
    coverage: f64,
    rng: ChaCha8Rng,
    steps: u64,
    accepted_births: u64,
    accepted_deaths: u64,
    nbr_buf: Vec<Point>,
    scratch: Vec<(f64, f64)>,
}

impl AippState {
    /// Empty initial configuration.
    pub fn new(params: AippParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let grid = Grid::new(params.rho);
        Ok(AippState {
            params,
            points: Vec::new(),
            grid,
            coverage: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            accepted_births: 0,
            accepted_deaths: 0,
            nbr_buf: Vec::new(),
            scratch: Vec::new(),
        })
    }

    /// Start from a given configuration (coverage computed from scratch).
    pub fn from_points(params: AippParams, points: Vec<Point>, seed: u64) -> Result<Self> {
        let mut state = AippState::new(params, seed)?;
        for (i, &p) in points.iter().enumerate() {
            state.grid.insert(i as u32, p);
        }
        state.coverage = coverage_area(&points, state.params.rho, state.params.clip_coverage);
        state.points = points;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Cached coverage area lambda(x (+) G).
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn acceptance_counts(&self) -> (u64, u64) {
        (self.accepted_births, self.accepted_deaths)
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::new(DomainKind::Square, self.points.clone())
    }

    /// Recompute the coverage cache from scratch (diagnostic / drift control).
    pub fn refresh_coverage(&mut self) {
        self.coverage = coverage_area(&self.points, self.params.rho, self.params.clip_coverage);
    }

    /// One birth-death Metropolis-Hastings proposal.
    pub fn bd_mh_step(&mut self) {
        self.steps += 1;
        let birth = self.rng.gen::<f64>() < 0.5;
        let log_gamma = self.params.log_gamma();
        if birth {
            let u = Point::new(self.rng.gen::<f64>(), self.rng.gen::<f64>());
            self.grid.neighbors(u, &self.points, &mut self.nbr_buf);
            let delta = new_disk_area_with(
                u,
                &self.nbr_buf,
                self.params.rho,
                self.params.clip_coverage,
                &mut self.scratch,
            );
            let log_lambda = self.params.beta.ln() - log_gamma * delta;
            let n1 = (self.points.len() + 1) as f64;
            let accept = self.rng.gen::<f64>();
            if accept.ln() < log_lambda - n1.ln() {
                let idx = self.points.len() as u32;
                self.points.push(u);
                self.grid.insert(idx, u);
                self.coverage += delta;
                self.accepted_births += 1;
            }
        } else {
            let n = self.points.len();
            if n == 0 {
                return; // automatic rejection
            }
            let victim = self.rng.gen_range(0..n);
            let p = self.points[victim];
            self.grid
                .neighbors_excluding(p, &self.points, victim as u32, &mut self.nbr_buf);
            let delta = new_disk_area_with(
                p,
                &self.nbr_buf,
                self.params.rho,
                self.params.clip_coverage,
                &mut self.scratch,
            );
            // lambda*(p; x \ p) drives the death acceptance min(1, n / lambda*)
            let log_lambda = self.params.beta.ln() - log_gamma * delta;
            let accept = self.rng.gen::<f64>();
            if accept.ln() < (n as f64).ln() - log_lambda {
                self.grid.remove(victim as u32, p);
                let last = self.points.len() - 1;
                if victim != last {
                    let moved = self.points[last];
                    self.grid.relabel(last as u32, victim as u32, moved);
                }
                self.points.swap_remove(victim);
                self.coverage -= delta;
                self.accepted_deaths += 1;
            }
        }
    }

    pub fn run(&mut self, proposals: u64) {
        for _ in 0..proposals {
            self.bd_mh_step();
        }
    }
}

/// Convergence diagnostics recorded while burning in a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AippDiagnostics {
    /// Point counts sampled every `trace_period` proposals.
    pub count_trace: Vec<usize>,
    /// Coverage areas sampled on the same schedule.
    pub coverage_trace: Vec<f64>,
    pub trace_period: u64,
    /// Lag-k autocorrelation of the count over the second half of the trace,
    /// for k = 1..=20.
    pub count_autocorrelation: Vec<f64>,
    /// Mean count over the second half of the trace.
    pub mean_count: f64,
    /// True if the count trace still shows a significant trend across the
    /// second half (heuristic non-convergence warning, not fatal).
    pub trend_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput {
    pub configuration: Configuration,
    pub diagnostics: AippDiagnostics,
    pub seed: u64,
}

fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    if n < 3 {
        return vec![0.0; max_lag];
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (1..=max_lag)
        .map(|k| {
            if k >= n || var <= 0.0 {
                return 0.0;
            }
            let cov: f64 = (0..n - k)
                .map(|i| (xs[i] - mean) * (xs[i + k] - mean))
                .sum::<f64>()
                / n as f64;
            cov / var
        })
        .collect()
}

fn trend_detected(xs: &[f64]) -> bool {
    // split-half comparison with a crude 3-sigma rule; autocorrelation makes
    // this conservative only as a heuristic, which is all it claims to be
    let n = xs.len();
    if n < 8 {
        return false;
    }
    let (a, b) = xs.split_at(n / 2);
    let stats = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        let v = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64;
        (m, v / s.len() as f64)
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    let se = (va + vb).sqrt();
    se > 0.0 && (ma - mb).abs() > 3.0 * se
}

/// Run a fresh chain for `burnin_steps` proposals and return the final
/// configuration plus burn-in diagnostics.
pub fn sample(params: &AippParams, burnin_steps: u64, seed: u64) -> Result<SampleOutput> {
    let mut state = AippState::new(params.clone(), seed)?;
    let output = sample_with_state(&mut state, burnin_steps, seed)?;
    Ok(output)
}

fn sample_with_state(
    state: &mut AippState,
    burnin_steps: u64,
    seed: u64,
) -> Result<SampleOutput> {
    let trace_period = burnin_steps.div_ceil(1024).max(1);
    let mut count_trace = Vec::new();
    let mut coverage_trace = Vec::new();
    let mut remaining = burnin_steps;
    while remaining > 0 {
        let chunk = trace_period.min(remaining);
        state.run(chunk);
        remaining -= chunk;
        count_trace.push(state.n());
        coverage_trace.push(state.coverage());
    }
    let half: Vec<f64> = count_trace[count_trace.len() / 2..]
        .iter()
        .map(|&c| c as f64)
        .collect();
    let mean_count = if half.is_empty() {
        state.n() as f64
    } else {
        half.iter().sum::<f64>() / half.len() as f64
    };
    let diagnostics = AippDiagnostics {
        count_autocorrelation: autocorrelation(&half, 20),
        trend_warning: trend_detected(&half),
        count_trace,
        coverage_trace,
        trace_period,
        mean_count,
    };
    Ok(SampleOutput {
        configuration: state.configuration(),
        diagnostics,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRound {
    pub beta: f64,
    pub mean_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub beta: f64,
    pub rounds: usize,
    pub trace: Vec<TuneRound>,
}

const TUNE_MAX_ROUNDS: usize = 40;

/// Robbins-Monro stochastic approximation on ln beta toward the target mean
/// point count. The chain state persists across rounds (warm start), so each
/// round only needs a short re-equilibration before its measurement window.
pub fn tune_beta(params: &AippParams, tolerance_fraction: f64, seed: u64) -> Result<TuneResult> {
    params.validate()?;
    if !(tolerance_fraction > 0.0) {
        return Err(AippError::InvalidParams(
            "tolerance_fraction must be positive",
        ));
    }
    let target = params.target_count;
    let window = ((50.0 * target) as u64).max(20_000);
    let sample_every = 50u64;
    let mut state = AippState::new(params.clone(), seed)?;
    state.run(window); // initial equilibration from empty
    let mut trace = Vec::new();
    let mut hits = 0u32; // consecutive in-tolerance windows
    for round in 1..=TUNE_MAX_ROUNDS {
        // re-equilibrate after any beta change, then measure a full window
        state.run(window / 2);
        let mut sum = 0.0;
        let mut k = 0u64;
        let mut left = window;
        while left > 0 {
            let chunk = sample_every.min(left);
            state.run(chunk);
            left -= chunk;
            sum += state.n() as f64;
            k += 1;
        }
        let mean = sum / k as f64;
        trace.push(TuneRound {
            beta: state.params.beta,
            mean_count: mean,
        });
        if (mean / target - 1.0).abs() <= tolerance_fraction {
            // demand two consecutive clean windows so a transient cannot
            // terminate the search while the count is still drifting
            hits += 1;
            if hits >= 2 {
                return Ok(TuneResult {
                    beta: state.params.beta,
                    rounds: round,
                    trace,
                });
            }
            continue;
        }
        hits = 0;
        let gain = 1.0 / (1.0 + round as f64 / 8.0);
        let log_beta = state.params.beta.ln() + gain * (target.ln() - mean.max(1.0).ln());
        state.params.beta = log_beta.exp();
    }
    Err(AippError::TuneFailed {
        rounds: TUNE_MAX_ROUNDS,
        trace,
    })
}
