//! Voronoi/Delaunay structures on the circle, the unit square and the flat
//! torus: full builds, single-point replacement, cell measures, adjacency and
//! nearest-neighbour depth.

mod circle;
mod planar;
pub(crate) mod polygon;

use serde::{Deserialize, Serialize};

pub use circle::circle_cells;

/// Minimum separation enforced between any two generators.
pub const MIN_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Circle,
    Square,
    Torus,
}

impl DomainKind {
    /// All three domains are normalised to unit total measure.
    pub fn total_measure(&self) -> f64 {
        1.0
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainKind::Circle => 1,
            DomainKind::Square | DomainKind::Torus => 2,
        }
    }

    pub fn has_boundary(&self) -> bool {
        matches!(self, DomainKind::Square)
    }

    /// Distance between two points of the domain.
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        match self {
            DomainKind::Circle => {
                let d = (a.x - b.x).abs();
                d.min(1.0 - d)
            }
            DomainKind::Square => a.dist(b),
            DomainKind::Torus => {
                let dx = (a.x - b.x).abs();
                let dx = dx.min(1.0 - dx);
                let dy = (a.y - b.y).abs();
                let dy = dy.min(1.0 - dy);
                (dx * dx + dy * dy).sqrt()
            }
        }
    }
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainKind::Circle => write!(f, "circle"),
            DomainKind::Square => write!(f, "square"),
            DomainKind::Torus => write!(f, "torus"),
        }
    }
}

/// Planar point; on the circle only `x` is used and `y` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// A labelled N-point configuration. Labels are the vector indices and stay
/// stable over the lifetime of a process run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub domain: DomainKind,
    pub points: Vec<Point>,
}

impl Configuration {
    pub fn new(domain: DomainKind, points: Vec<Point>) -> Self {
        Configuration { domain, points }
    }

    /// Circle configuration from scalar positions in [0,1).
    pub fn circle(positions: &[f64]) -> Self {
        Configuration {
            domain: DomainKind::Circle,
            points: positions.iter().map(|&x| Point::new(x, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Geometric description of one Voronoi cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellShape {
    /// Circular arc starting at `start` (mod 1) with the given width.
    Interval { start: f64, width: f64 },
    /// Convex polygon, CCW. For the torus the vertices are unwrapped around
    /// the generator and may lie outside the unit square.
    Polygon(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub generator_id: u32,
    pub area: f64,
    /// Sorted labels of generators whose cells share a boundary segment of
    /// positive length (after clipping, on the square).
    pub neighbor_ids: Vec<u32>,
    /// Square domain only; always false on circle/torus.
    pub touches_boundary: bool,
    pub shape: CellShape,
}

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate input involving labels {labels:?}")]
    DegenerateInput { labels: Vec<u32> },
    #[error("proposed point is within {MIN_SEPARATION:e} of point {existing}")]
    TooClose { existing: u32 },
    #[error("{op} is unsupported on the {kind} domain")]
    UnsupportedDomain { op: &'static str, kind: DomainKind },
    #[error("need at least {needed} points on the {kind} domain, got {got}")]
    TooFewPoints {
        kind: DomainKind,
        needed: usize,
        got: usize,
    },
    #[error("unknown label {0}")]
    UnknownLabel(u32),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

enum Engine {
    Circle(circle::CircleEngine),
    Square(planar::SquareEngine),
    Torus(planar::TorusEngine),
}

/// Voronoi tessellation of a configuration, with incremental single-point
/// replacement.
pub struct Tessellation {
    domain: DomainKind,
    cells: Vec<Cell>,
    version: u64,
    engine: Engine,
}

pub fn build_tessellation(config: &Configuration) -> Result<Tessellation> {
    let n = config.len();
    match config.domain {
        DomainKind::Circle => {
            if n < 1 {
                return Err(GeometryError::TooFewPoints {
                    kind: config.domain,
                    needed: 1,
                    got: n,
                });
            }
            let (engine, cells) = circle::CircleEngine::build(&config.points)?;
            Ok(Tessellation {
                domain: config.domain,
                cells,
                version: 0,
                engine: Engine::Circle(engine),
            })
        }
        DomainKind::Square => {
            if n < 3 {
                return Err(GeometryError::TooFewPoints {
                    kind: config.domain,
                    needed: 3,
                    got: n,
                });
            }
            let (engine, cells) = planar::SquareEngine::build(&config.points)?;
            Ok(Tessellation {
                domain: config.domain,
                cells,
                version: 0,
                engine: Engine::Square(engine),
            })
        }
        DomainKind::Torus => {
            if n < 3 {
                return Err(GeometryError::TooFewPoints {
                    kind: config.domain,
                    needed: 3,
                    got: n,
                });
            }
            let (engine, cells) = planar::TorusEngine::build(config.points.clone(), true)?;
            Ok(Tessellation {
                domain: config.domain,
                cells,
                version: 0,
                engine: Engine::Torus(engine),
            })
        }
    }
}

impl Tessellation {
    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: u32) -> Result<&Cell> {
        self.cells
            .get(id as usize)
            .ok_or(GeometryError::UnknownLabel(id))
    }

    pub fn point(&self, id: u32) -> Result<Point> {
        self.configuration_point(id)
            .ok_or(GeometryError::UnknownLabel(id))
    }

    fn configuration_point(&self, id: u32) -> Option<Point> {
        let i = id as usize;
        match &self.engine {
            Engine::Circle(e) => e.position(i).map(|x| Point::new(x, 0.0)),
            Engine::Square(e) => e.position(i),
            Engine::Torus(e) => e.position(i),
        }
    }

    pub fn configuration(&self) -> Configuration {
        let points = (0..self.cells.len() as u32)
            .map(|id| self.configuration_point(id).expect("label in range"))
            .collect();
        Configuration::new(self.domain, points)
    }

    /// Delaunay adjacency as an undirected edge list (sorted pairs).
    pub fn adjacency(&self) -> Vec<(u32, u32)> {
        let mut edges = Vec::new();
        for cell in &self.cells {
            for &j in &cell.neighbor_ids {
                if cell.generator_id < j {
                    edges.push((cell.generator_id, j));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    /// Remove the generator `id` and insert `new_point` under the same label.
    /// Returns the labels of every cell whose area or neighbour set changed.
    pub fn replace_point(&mut self, id: u32, new_point: Point) -> Result<Vec<u32>> {
        if id as usize >= self.cells.len() {
            return Err(GeometryError::UnknownLabel(id));
        }
        let changed = match &mut self.engine {
            Engine::Circle(e) => e.replace(&mut self.cells, id, new_point.x)?,
            Engine::Square(e) => e.replace(&mut self.cells, id, new_point)?,
            Engine::Torus(e) => e.replace(&mut self.cells, id, new_point)?,
        };
        self.version += 1;
        Ok(changed)
    }

    /// NN-depth of every cell: 1 for cells touching the boundary, otherwise
    /// 1 + the minimum over neighbours (BFS from the boundary layer).
    pub fn nn_depths(&self) -> Result<Vec<u32>> {
        if self.domain != DomainKind::Square {
            return Err(GeometryError::UnsupportedDomain {
                op: "nn_depth",
                kind: self.domain,
            });
        }
        let n = self.cells.len();
        let mut depth = vec![0u32; n];
        let mut queue = std::collections::VecDeque::new();
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.touches_boundary {
                depth[i] = 1;
                queue.push_back(i);
            }
        }
        // N=1: the single cell is the whole square and touches the boundary.
        while let Some(i) = queue.pop_front() {
            for &j in &self.cells[i].neighbor_ids {
                let j = j as usize;
                if depth[j] == 0 {
                    depth[j] = depth[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        debug_assert!(depth.iter().all(|&d| d > 0), "adjacency graph connected");
        for d in depth.iter_mut() {
            if *d == 0 {
                *d = u32::MAX;
            }
        }
        Ok(depth)
    }

    pub fn nn_depth(&self, id: u32) -> Result<u32> {
        if id as usize >= self.cells.len() {
            return Err(GeometryError::UnknownLabel(id));
        }
        Ok(self.nn_depths()?[id as usize])
    }

    /// Diagnostic checks; never fails, only reports.
    pub fn validate(&self) -> ValidationReport {
        let area_sum: f64 = self.cells.iter().map(|c| c.area).sum();
        let mut asymmetric_pairs = 0usize;
        for cell in &self.cells {
            for &j in &cell.neighbor_ids {
                let back = &self.cells[j as usize];
                if back.neighbor_ids.binary_search(&cell.generator_id).is_err() {
                    asymmetric_pairs += 1;
                }
            }
        }
        let degree_sum: usize = self.cells.iter().map(|c| c.neighbor_ids.len()).sum();
        let euler_mean_degree = if self.domain == DomainKind::Torus {
            Some(degree_sum as f64 / self.cells.len() as f64)
        } else {
            None
        };
        let mut generator_violations = Vec::new();
        for cell in &self.cells {
            let p = match self.configuration_point(cell.generator_id) {
                Some(p) => p,
                None => continue,
            };
            let inside = match &cell.shape {
                CellShape::Interval { start, width } => {
                    let rel = (p.x - start).rem_euclid(1.0);
                    rel <= width + 1e-9
                }
                CellShape::Polygon(pts) => point_in_convex(pts, p, 1e-9),
            };
            if !inside {
                generator_violations.push(cell.generator_id);
            }
        }
        ValidationReport {
            area_sum_residual: area_sum - 1.0,
            asymmetric_pairs,
            degree_sum_even: degree_sum % 2 == 0,
            euler_mean_degree,
            generator_violations,
        }
    }
}

fn point_in_convex(pts: &[Point], p: Point, tol: f64) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross < -tol {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub area_sum_residual: f64,
    pub asymmetric_pairs: usize,
    pub degree_sum_even: bool,
    /// Mean neighbour count; populated on the torus where Euler's relation
    /// forces it to be exactly six.
    pub euler_mean_degree: Option<f64>,
    pub generator_violations: Vec<u32>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.area_sum_residual.abs() <= 1e-9
            && self.asymmetric_pairs == 0
            && self.degree_sum_even
            && self.euler_mean_degree.map_or(true, |d| d == 6.0)
            && self.generator_violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_equally_spaced_circle_points() {
        let config = Configuration::circle(&[0.0, 0.25, 0.5, 0.75]);
        let tess = build_tessellation(&config).unwrap();
        for cell in tess.cells() {
            assert!((cell.area - 0.25).abs() < 1e-15);
        }
        assert!(tess.validate().all_pass());
    }

    #[test]
    fn circle_widths_direct_formula() {
        assert_eq!(circle_cells(&[0.0, 0.5]).unwrap(), vec![0.5, 0.5]);
        let w = circle_cells(&[0.0, 0.1, 0.5]).unwrap();
        for (got, want) in w.iter().zip([0.3, 0.25, 0.45]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(circle_cells(&[0.3]).unwrap(), vec![1.0]);
        assert!(matches!(
            circle_cells(&[0.2, 0.2]),
            Err(GeometryError::DegenerateInput { .. })
        ));
    }

    #[test]
    fn square_corner_symmetry() {
        let pts = vec![
            Point::new(0.25, 0.25),
            Point::new(0.75, 0.25),
            Point::new(0.25, 0.75),
            Point::new(0.75, 0.75),
        ];
        let tess = build_tessellation(&Configuration::new(DomainKind::Square, pts)).unwrap();
        for cell in tess.cells() {
            assert!((cell.area - 0.25).abs() < 1e-12, "area {}", cell.area);
            assert!(cell.touches_boundary);
        }
        assert_eq!(tess.nn_depths().unwrap(), vec![1, 1, 1, 1]);
        assert!(tess.validate().all_pass());
    }

    #[test]
    fn three_general_position_points_all_adjacent() {
        let pts = vec![
            Point::new(0.21, 0.31),
            Point::new(0.72, 0.45),
            Point::new(0.43, 0.82),
        ];
        let tess = build_tessellation(&Configuration::new(DomainKind::Square, pts)).unwrap();
        for cell in tess.cells() {
            assert_eq!(cell.neighbor_ids.len(), 2);
        }
        assert!(tess.validate().all_pass());
    }

    #[test]
    fn torus_euler_mean_degree() {
        let mut pts = Vec::new();
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let x = next();
            let y = next();
            pts.push(Point::new(x, y));
        }
        let tess = build_tessellation(&Configuration::new(DomainKind::Torus, pts)).unwrap();
        let report = tess.validate();
        assert_eq!(report.euler_mean_degree, Some(6.0));
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn replace_point_reinsert_is_idempotent() {
        let pts = vec![
            Point::new(0.2, 0.3),
            Point::new(0.7, 0.4),
            Point::new(0.4, 0.8),
            Point::new(0.5, 0.5),
        ];
        let config = Configuration::new(DomainKind::Square, pts);
        let mut tess = build_tessellation(&config).unwrap();
        let before: Vec<Cell> = tess.cells().to_vec();
        let p = tess.point(3).unwrap();
        tess.replace_point(3, p).unwrap();
        assert_eq!(tess.cells(), &before[..]);
    }

    #[test]
    fn unsupported_domain_for_depth() {
        let config = Configuration::circle(&[0.1, 0.6]);
        let tess = build_tessellation(&config).unwrap();
        assert!(matches!(
            tess.nn_depths(),
            Err(GeometryError::UnsupportedDomain { .. })
        ));
    }
}
