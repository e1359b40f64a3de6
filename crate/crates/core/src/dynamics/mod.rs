//! The Voronoi point-process Markov step: weight every cell with the
//! selection function, cull one generator with probability proportional to
//! its weight, place a uniform replacement, and update only the cells the
//! replacement touched.

mod fenwick;

pub use fenwick::FenwickTree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    build_tessellation, Cell, Configuration, DomainKind, GeometryError, Point, Tessellation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedSelection {
    Vanilla,
    AntiMany,
    AntiFew,
    Anti6,
    Pro6,
    Pro5,
    Anti5,
    Pro4,
    Anti4,
    Pro7,
    Anti7,
}

impl NamedSelection {
    pub const ALL: [NamedSelection; 11] = [
        NamedSelection::Vanilla,
        NamedSelection::AntiMany,
        NamedSelection::AntiFew,
        NamedSelection::Anti6,
        NamedSelection::Pro6,
        NamedSelection::Pro5,
        NamedSelection::Anti5,
        NamedSelection::Pro4,
        NamedSelection::Anti4,
        NamedSelection::Pro7,
        NamedSelection::Anti7,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NamedSelection::Vanilla => "vanilla",
            NamedSelection::AntiMany => "anti-many",
            NamedSelection::AntiFew => "anti-few",
            NamedSelection::Anti6 => "anti-6",
            NamedSelection::Pro6 => "pro-6",
            NamedSelection::Pro5 => "pro-5",
            NamedSelection::Anti5 => "anti-5",
            NamedSelection::Pro4 => "pro-4",
            NamedSelection::Anti4 => "anti-4",
            NamedSelection::Pro7 => "pro-7",
            NamedSelection::Anti7 => "anti-7",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// Weight as a function of the neighbour count. `anti-few` is singular
    /// at n = 2, which boundary-clipped cells can reach; n is clamped to
    /// at least 3 there so the weight stays finite.
    pub fn weight(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            NamedSelection::Vanilla => n,
            NamedSelection::AntiMany => n * n,
            NamedSelection::AntiFew => {
                let m = n.max(3.0) - 2.0;
                1.0 / (m * m)
            }
            NamedSelection::Anti6 => {
                let d = 0.1 + (n - 6.0).abs();
                1.0 / (d * d)
            }
            NamedSelection::Pro6 => (n - 6.0) * (n - 6.0),
            NamedSelection::Anti5 => sharp(n, 5.0, 5000.0, 1.0),
            NamedSelection::Pro5 => sharp(n, 5.0, 1.0, 5000.0),
            NamedSelection::Anti4 => sharp(n, 4.0, 5000.0, 1.0),
            NamedSelection::Pro4 => sharp(n, 4.0, 1.0, 5000.0),
            NamedSelection::Anti7 => sharp(n, 7.0, 5000.0, 1.0),
            NamedSelection::Pro7 => sharp(n, 7.0, 1.0, 5000.0),
        }
    }
}

fn sharp(n: f64, target: f64, at_target: f64, elsewhere: f64) -> f64 {
    if n == target {
        at_target
    } else {
        elsewhere
    }
}

impl std::fmt::Display for NamedSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Declarative culling weight: either a power of the cell volume or a named
/// function of the neighbour count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionSpec {
    VolumePower { alpha: f64 },
    Neighbour(NamedSelection),
}

impl SelectionSpec {
    pub fn weight(&self, cell: &Cell) -> f64 {
        match self {
            SelectionSpec::VolumePower { alpha } => cell.area.powf(*alpha),
            SelectionSpec::Neighbour(named) => named.weight(cell.neighbor_ids.len()),
        }
    }
}

/// Per-cell selection weight S(C).
pub fn selection_weight(spec: &SelectionSpec, cell: &Cell) -> f64 {
    spec.weight(cell)
}

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("all selection weights are zero; the culling law is undefined")]
    ZeroTotalWeight,
    #[error("could not place a replacement after {0} redraws")]
    PlacementExhausted(u32),
    #[error("observer `{observer}` failed at step {step}: {message}")]
    ObserverFailed {
        observer: String,
        step: u64,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// Record of one Markov step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub culled: u32,
    /// The culled cell's share of the total selection weight, in (0,1].
    pub weight_share: f64,
    pub new_point: Point,
}

/// Configuration + tessellation + cached weights + RNG: the unit of one
/// simulation step.
pub struct ProcessState {
    tess: Tessellation,
    spec: SelectionSpec,
    weights: FenwickTree,
    rng: ChaCha8Rng,
    step_count: u64,
    redraws: u64,
}

/// Hard cap on placement redraws per step; the rejection event has
/// probability ~0 under uniform placement.
const MAX_REDRAWS: u32 = 1000;

impl ProcessState {
    /// i.i.d. uniform initial configuration, tessellated and weighted.
    ///
    /// RNG draw order is part of the reproducibility contract: first the N
    /// initial points in label order (x, then y where 2-D), then per step a
    /// cull draw, then placement coordinates, then any rejection redraws.
    pub fn init_uniform(
        n: usize,
        domain: DomainKind,
        spec: SelectionSpec,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tess = loop {
            let points: Vec<Point> = (0..n)
                .map(|_| draw_point(&mut rng, domain))
                .collect();
            match build_tessellation(&Configuration::new(domain, points)) {
                Ok(t) => break t,
                // colliding or collinear uniform draws have probability ~0;
                // redraw the whole configuration
                Err(GeometryError::DegenerateInput { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        };
        Self::from_tessellation(tess, spec, rng)
    }

    /// Wrap an existing tessellation; used to continue from saved patterns.
    pub fn from_parts(tess: Tessellation, spec: SelectionSpec, seed: u64) -> Result<Self> {
        Self::from_tessellation(tess, spec, ChaCha8Rng::seed_from_u64(seed))
    }

    fn from_tessellation(
        tess: Tessellation,
        spec: SelectionSpec,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let weights: Vec<f64> = tess.cells().iter().map(|c| spec.weight(c)).collect();
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(DynamicsError::ZeroTotalWeight);
        }
        Ok(ProcessState {
            tess,
            spec,
            weights: FenwickTree::new(weights),
            rng,
            step_count: 0,
            redraws: 0,
        })
    }

    pub fn tessellation(&self) -> &Tessellation {
        &self.tess
    }

    pub fn selection(&self) -> &SelectionSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.tess.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tess.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Total placement redraws forced by the minimum-separation guard.
    pub fn redraw_count(&self) -> u64 {
        self.redraws
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.values()
    }

    /// The culling law P(J = j) = S(C_j) / sum_i S(C_i).
    pub fn cull_distribution(&self) -> Result<Vec<f64>> {
        let total: f64 = self.weights.values().iter().sum();
        if total <= 0.0 {
            return Err(DynamicsError::ZeroTotalWeight);
        }
        Ok(self.weights.values().iter().map(|w| w / total).collect())
    }

    /// Draw a cull index from the frozen state through the same weighted
    /// lookup `step` uses, without applying the replacement. Consumes one
    /// uniform from the RNG stream; intended for distribution diagnostics.
    pub fn sample_cull(&mut self) -> Result<u32> {
        let total = self.weights.total();
        if !(total > 0.0) {
            return Err(DynamicsError::ZeroTotalWeight);
        }
        let target = self.rng.gen::<f64>() * total;
        Ok(self.weights.find(target) as u32)
    }

    /// One Markov transition. Cardinality is conserved; the new point takes
    /// over the culled label.
    pub fn step(&mut self) -> Result<StepRecord> {
        let total = self.weights.total();
        if !(total > 0.0) {
            return Err(DynamicsError::ZeroTotalWeight);
        }
        let target = self.rng.gen::<f64>() * total;
        let culled = self.weights.find(target) as u32;
        let weight_share = self.weights.value(culled as usize) / total;

        let domain = self.tess.domain();
        let mut placed = None;
        for _ in 0..MAX_REDRAWS {
            let p = draw_point(&mut self.rng, domain);
            match self.tess.replace_point(culled, p) {
                Ok(changed) => {
                    placed = Some((p, changed));
                    break;
                }
                Err(GeometryError::TooClose { .. }) => {
                    self.redraws += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let (new_point, changed) = placed.ok_or(DynamicsError::PlacementExhausted(MAX_REDRAWS))?;
        for id in changed {
            let w = self.spec.weight(self.tess.cell(id).expect("changed id exists"));
            self.weights.set(id as usize, w);
        }
        self.step_count += 1;
        Ok(StepRecord {
            step: self.step_count,
            culled,
            weight_share,
            new_point,
        })
    }
}

fn draw_point(rng: &mut ChaCha8Rng, domain: DomainKind) -> Point {
    match domain {
        DomainKind::Circle => Point::new(rng.gen::<f64>(), 0.0),
        DomainKind::Square | DomainKind::Torus => {
            let x = rng.gen::<f64>();
            let y = rng.gen::<f64>();
            Point::new(x, y)
        }
    }
}

/// Observation produced by an observer callback.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub step: u64,
    pub observer: String,
    pub value: serde_json::Value,
}

type ObserverFn<'a> =
    Box<dyn FnMut(&ProcessState) -> std::result::Result<serde_json::Value, String> + 'a>;

/// Callback sampled every `period` steps (at steps period, 2*period, ...).
pub struct Observer<'a> {
    pub name: String,
    pub period: u64,
    pub callback: ObserverFn<'a>,
}

impl<'a> Observer<'a> {
    pub fn new<F>(name: impl Into<String>, period: u64, callback: F) -> Self
    where
        F: FnMut(&ProcessState) -> std::result::Result<serde_json::Value, String> + 'a,
    {
        Observer {
            name: name.into(),
            period: period.max(1),
            callback: Box::new(callback),
        }
    }
}

/// Apply exactly `steps` transitions, invoking each observer on its period.
/// On observer failure the run aborts and the partial log is preserved in
/// the error.
pub fn evolve(
    state: &mut ProcessState,
    steps: u64,
    observers: &mut [Observer<'_>],
) -> std::result::Result<Vec<Observation>, (DynamicsError, Vec<Observation>)> {
    let mut log = Vec::new();
    for _ in 0..steps {
        if let Err(e) = state.step() {
            return Err((e, log));
        }
        let s = state.step_count();
        for obs in observers.iter_mut() {
            if s % obs.period == 0 {
                match (obs.callback)(state) {
                    Ok(value) => log.push(Observation {
                        step: s,
                        observer: obs.name.clone(),
                        value,
                    }),
                    Err(message) => {
                        return Err((
                            DynamicsError::ObserverFailed {
                                observer: obs.name.clone(),
                                step: s,
                                message,
                            },
                            log,
                        ))
                    }
                }
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_weight_examples() {
        let cell = |area: f64, n: usize| Cell {
            generator_id: 0,
            area,
            neighbor_ids: (1..=n as u32).collect(),
            touches_boundary: false,
            shape: crate::geometry::CellShape::Interval {
                start: 0.0,
                width: area,
            },
        };
        let vp = SelectionSpec::VolumePower { alpha: 1.0 };
        assert_eq!(vp.weight(&cell(0.25, 2)), 0.25);
        let anti6 = SelectionSpec::Neighbour(NamedSelection::Anti6);
        assert!((anti6.weight(&cell(0.1, 6)) - 100.0).abs() < 1e-12);
        let pro5 = SelectionSpec::Neighbour(NamedSelection::Pro5);
        assert_eq!(pro5.weight(&cell(0.1, 5)), 1.0);
        assert_eq!(pro5.weight(&cell(0.1, 7)), 5000.0);
        // anti-few singularity clamp: n = 2 behaves like n = 3
        let anti_few = NamedSelection::AntiFew;
        assert_eq!(anti_few.weight(2), 1.0);
        assert_eq!(anti_few.weight(3), 1.0);
        assert!((anti_few.weight(5) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cull_distribution_substitution() {
        // circle widths (0.3, 0.25, 0.45)
        let tess = build_tessellation(&Configuration::circle(&[0.0, 0.1, 0.5])).unwrap();
        let state = ProcessState::from_parts(tess, SelectionSpec::VolumePower { alpha: 1.0 }, 1)
            .unwrap();
        let d = state.cull_distribution().unwrap();
        for (got, want) in d.iter().zip([0.3, 0.25, 0.45]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let tess = build_tessellation(&Configuration::circle(&[0.0, 0.1, 0.5])).unwrap();
        let state = ProcessState::from_parts(tess, SelectionSpec::VolumePower { alpha: -1.0 }, 1)
            .unwrap();
        let d = state.cull_distribution().unwrap();
        let raw = [1.0 / 0.3, 1.0 / 0.25, 1.0 / 0.45];
        let total: f64 = raw.iter().sum();
        for (got, want) in d.iter().zip(raw) {
            assert!((got - want / total).abs() < 1e-12);
        }

        // S constant across cells: uniform law
        let tess = build_tessellation(&Configuration::circle(&[0.0, 0.13, 0.4, 0.62, 0.9]))
            .unwrap();
        let state = ProcessState::from_parts(tess, SelectionSpec::VolumePower { alpha: 0.0 }, 1)
            .unwrap();
        for p in state.cull_distribution().unwrap() {
            assert!((p - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_determinism() {
        let spec = SelectionSpec::VolumePower { alpha: 0.5 };
        let mut a = ProcessState::init_uniform(32, DomainKind::Circle, spec, 42).unwrap();
        let mut b = ProcessState::init_uniform(32, DomainKind::Circle, spec, 42).unwrap();
        for _ in 0..100 {
            let ra = a.step().unwrap();
            let rb = b.step().unwrap();
            assert_eq!(ra.culled, rb.culled);
            assert_eq!(ra.new_point, rb.new_point);
        }
        assert_eq!(a.tessellation().configuration(), b.tessellation().configuration());
    }

    #[test]
    fn evolve_bookkeeping() {
        let spec = SelectionSpec::VolumePower { alpha: 0.0 };
        let mut state = ProcessState::init_uniform(16, DomainKind::Circle, spec, 7).unwrap();
        let mut observers = vec![Observer::new("count", 4, |s: &ProcessState| {
            Ok(serde_json::json!(s.len()))
        })];
        let log = evolve(&mut state, 0, &mut observers).unwrap();
        assert!(log.is_empty());
        let log = evolve(&mut state, 16, &mut observers).unwrap();
        assert_eq!(log.len(), 4);
        assert_eq!(state.step_count(), 16);
        assert_eq!(state.len(), 16);
    }
}
