//! 2-D engines. The unit square is served by an incremental Delaunay
//! triangulation (insertion and cavity-retriangulating deletion with robust
//! predicates, via `spade`), dualised to Voronoi cells by clipping bisector
//! half-planes against the square. The flat torus uses the replicated-copies
//! construction with an adaptive replication margin.

use std::collections::BTreeSet;

use spade::handles::FixedVertexHandle;
use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use super::polygon::{EdgeTag, TaggedPolygon};
use super::{Cell, CellShape, GeometryError, Point, Result, MIN_SEPARATION};

/// Forced full rebuild cadence for the incremental square engine; bounds any
/// drift accumulated over long replacement sequences.
const REBUILD_PERIOD: u32 = 1024;

struct Site {
    pos: Point2<f64>,
    label: u32,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

fn in_unit_square(p: Point) -> bool {
    (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)
}

// ---------------------------------------------------------------------------
// Square
// ---------------------------------------------------------------------------

pub(super) struct SquareEngine {
    tri: DelaunayTriangulation<Site>,
    handles: Vec<FixedVertexHandle>,
    points: Vec<Point>,
    /// Per-label neighbour candidates derived from the cell's own clipped
    /// polygon; the exported neighbour set is the symmetrised union.
    own: Vec<BTreeSet<u32>>,
    polys: Vec<TaggedPolygon>,
    replacements: u32,
}

impl SquareEngine {
    pub fn build(points: &[Point]) -> Result<(Self, Vec<Cell>)> {
        let (tri, handles) = triangulate(points)?;
        if tri.num_inner_faces() == 0 {
            return Err(GeometryError::DegenerateInput {
                labels: (0..points.len() as u32).collect(),
            });
        }
        let n = points.len();
        let mut engine = SquareEngine {
            tri,
            handles,
            points: points.to_vec(),
            own: vec![BTreeSet::new(); n],
            polys: vec![TaggedPolygon::rect(0.0, 0.0, 1.0, 1.0); n],
            replacements: 0,
        };
        for label in 0..n as u32 {
            engine.compute_own(label);
        }
        let cells = (0..n as u32).map(|l| engine.finalize_cell(l)).collect();
        Ok((engine, cells))
    }

    pub fn position(&self, i: usize) -> Option<Point> {
        self.points.get(i).copied()
    }

    /// Delaunay one-ring of a label, unsorted.
    fn ring(&self, label: u32) -> Vec<u32> {
        let v = self.tri.vertex(self.handles[label as usize]);
        v.out_edges().map(|e| e.to().data().label).collect()
    }

    /// Clip the unit square by the bisectors of the Delaunay neighbours,
    /// visiting them in label order so the polygon is a pure function of the
    /// neighbour set.
    fn compute_own(&mut self, label: u32) {
        let p = self.points[label as usize];
        let mut ring: Vec<u32> = self.ring(label);
        ring.sort_unstable();
        ring.dedup();
        let mut poly = TaggedPolygon::rect(0.0, 0.0, 1.0, 1.0);
        for &l in &ring {
            poly.clip_bisector(p, self.points[l as usize], EdgeTag::Neighbor(l));
        }
        self.own[label as usize] = poly.neighbor_labels().collect();
        self.polys[label as usize] = poly;
    }

    fn finalize_cell(&self, label: u32) -> Cell {
        let poly = &self.polys[label as usize];
        let mut neighbors: BTreeSet<u32> = self.own[label as usize].clone();
        for l in self.ring(label) {
            if self.own[l as usize].contains(&label) {
                neighbors.insert(l);
            }
        }
        neighbors.remove(&label);
        Cell {
            generator_id: label,
            area: poly.area(),
            neighbor_ids: neighbors.into_iter().collect(),
            touches_boundary: poly.touches_seed(),
            shape: CellShape::Polygon(poly.pts.clone()),
        }
    }

    pub fn replace(&mut self, cells: &mut [Cell], id: u32, p: Point) -> Result<Vec<u32>> {
        if !in_unit_square(p) {
            return Err(GeometryError::DegenerateInput { labels: vec![id] });
        }
        let mut old_ring = self.ring(id);
        let old_pos = self.points[id as usize];

        let h = self.handles[id as usize];
        self.tri.remove(h);
        // removal swaps the last vertex slot into the vacated one
        if h.index() < self.tri.num_vertices() {
            let moved = self.tri.vertex(h).data().label;
            self.handles[moved as usize] = h;
        }
        if let Some(nearest) = self.tri.nearest_neighbor(Point2::new(p.x, p.y)) {
            if nearest.position().distance_2(Point2::new(p.x, p.y)) < MIN_SEPARATION.powi(2) {
                let existing = nearest.data().label;
                // restore the removed point before reporting the rejection
                let restored = self
                    .tri
                    .insert(Site {
                        pos: Point2::new(old_pos.x, old_pos.y),
                        label: id,
                    })
                    .expect("reinsertion of a previously valid point");
                self.handles[id as usize] = restored;
                return Err(GeometryError::TooClose { existing });
            }
        }
        let new_handle = self
            .tri
            .insert(Site {
                pos: Point2::new(p.x, p.y),
                label: id,
            })
            .expect("finite coordinates");
        self.handles[id as usize] = new_handle;
        self.points[id as usize] = p;

        let mut changed: Vec<u32> = self.ring(id);
        changed.append(&mut old_ring);
        changed.push(id);
        changed.sort_unstable();
        changed.dedup();

        self.replacements += 1;
        if self.replacements >= REBUILD_PERIOD {
            self.replacements = 0;
            let (tri, handles) = triangulate(&self.points)?;
            self.tri = tri;
            self.handles = handles;
            // a rebuild may re-resolve cocircular ties; fold any resulting
            // differences into the changed set
            for label in 0..self.points.len() as u32 {
                self.compute_own(label);
            }
            for label in 0..self.points.len() as u32 {
                let cell = self.finalize_cell(label);
                if cell != cells[label as usize] {
                    changed.push(label);
                    cells[label as usize] = cell;
                }
            }
            changed.sort_unstable();
            changed.dedup();
            return Ok(changed);
        }

        for &l in &changed {
            self.compute_own(l);
        }
        for &l in &changed {
            cells[l as usize] = self.finalize_cell(l);
        }
        Ok(changed)
    }
}

fn triangulate(points: &[Point]) -> Result<(DelaunayTriangulation<Site>, Vec<FixedVertexHandle>)> {
    let mut tri: DelaunayTriangulation<Site> = DelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        if !in_unit_square(p) {
            return Err(GeometryError::DegenerateInput {
                labels: vec![i as u32],
            });
        }
        let pos = Point2::new(p.x, p.y);
        if let Some(nearest) = tri.nearest_neighbor(pos) {
            if nearest.position().distance_2(pos) < MIN_SEPARATION.powi(2) {
                return Err(GeometryError::DegenerateInput {
                    labels: vec![nearest.data().label, i as u32],
                });
            }
        }
        let h = tri
            .insert(Site {
                pos,
                label: i as u32,
            })
            .map_err(|_| GeometryError::DegenerateInput {
                labels: vec![i as u32],
            })?;
        handles.push(h);
    }
    Ok((tri, handles))
}

// ---------------------------------------------------------------------------
// Torus
// ---------------------------------------------------------------------------

struct TorusSite {
    pos: Point2<f64>,
    label: u32,
    central: bool,
}

impl HasPosition for TorusSite {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

pub(super) struct TorusEngine {
    points: Vec<Point>,
    margin: f64,
    tri: DelaunayTriangulation<TorusSite>,
    /// All live copy handles per label (central copy included).
    copies: Vec<Vec<FixedVertexHandle>>,
    central: Vec<FixedVertexHandle>,
    own: Vec<BTreeSet<u32>>,
    polys: Vec<TaggedPolygon>,
    replacements: u32,
}

fn torus_dist_sq(a: Point, b: Point) -> f64 {
    let dx = (a.x - b.x).abs();
    let dx = dx.min(1.0 - dx);
    let dy = (a.y - b.y).abs();
    let dy = dy.min(1.0 - dy);
    dx * dx + dy * dy
}

impl TorusEngine {
    pub fn build(points: Vec<Point>, check_separation: bool) -> Result<(Self, Vec<Cell>)> {
        let points: Vec<Point> = points
            .iter()
            .map(|p| Point::new(p.x.rem_euclid(1.0), p.y.rem_euclid(1.0)))
            .collect();
        if check_separation {
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    if torus_dist_sq(points[i], points[j]) < MIN_SEPARATION * MIN_SEPARATION {
                        return Err(GeometryError::DegenerateInput {
                            labels: vec![i as u32, j as u32],
                        });
                    }
                }
            }
        }
        let n = points.len();
        let initial_margin = (3.0 / (n as f64).sqrt()).clamp(0.15, 2.0);
        let mut engine = TorusEngine {
            points,
            margin: initial_margin,
            tri: DelaunayTriangulation::new(),
            copies: vec![Vec::new(); n],
            central: Vec::new(),
            own: vec![BTreeSet::new(); n],
            polys: vec![TaggedPolygon::rect(0.0, 0.0, 1.0, 1.0); n],
            replacements: 0,
        };
        engine.full_rebuild()?;
        let cells = (0..n as u32).map(|l| engine.finalize_cell(l)).collect::<Result<_>>()?;
        Ok((engine, cells))
    }

    pub fn position(&self, i: usize) -> Option<Point> {
        self.points.get(i).copied()
    }

    fn band(&self, q: Point) -> bool {
        q.x >= -self.margin
            && q.x <= 1.0 + self.margin
            && q.y >= -self.margin
            && q.y <= 1.0 + self.margin
    }

    /// Rebuild the replicated triangulation from scratch, widening the band
    /// until every circumdisk touching a central vertex fits inside it, then
    /// refresh all cached polygons.
    fn full_rebuild(&mut self) -> Result<()> {
        loop {
            if self.try_populate()? {
                break;
            }
            // circumdisk escaped the replicated band: widen it. A margin of 2
            // always suffices since every empty circle on the unit torus has
            // radius at most sqrt(2)/2.
            self.margin = (self.margin * 2.0).min(2.0);
        }
        for label in 0..self.points.len() as u32 {
            self.compute_own(label)?;
        }
        Ok(())
    }

    fn try_populate(&mut self) -> Result<bool> {
        let n = self.points.len();
        let k = self.margin.ceil() as i32;
        let mut tri: DelaunayTriangulation<TorusSite> = DelaunayTriangulation::new();
        let mut copies = vec![Vec::new(); n];
        let mut central = Vec::with_capacity(n);
        for (i, &p) in self.points.iter().enumerate() {
            for oy in -k..=k {
                for ox in -k..=k {
                    let q = Point::new(p.x + ox as f64, p.y + oy as f64);
                    let is_central = ox == 0 && oy == 0;
                    if !is_central && !self.band(q) {
                        continue;
                    }
                    let h = tri
                        .insert(TorusSite {
                            pos: Point2::new(q.x, q.y),
                            label: i as u32,
                            central: is_central,
                        })
                        .map_err(|_| GeometryError::DegenerateInput {
                            labels: vec![i as u32],
                        })?;
                    copies[i].push(h);
                    if is_central {
                        central.push(h);
                    }
                }
            }
        }
        if tri.num_inner_faces() == 0 {
            return Err(GeometryError::DegenerateInput {
                labels: (0..n as u32).collect(),
            });
        }
        if self.margin < 2.0 {
            for face in tri.inner_faces() {
                if !face.vertices().iter().any(|v| v.data().central) {
                    continue;
                }
                let (c, r_sq) = face.circumcircle();
                let r = r_sq.max(0.0).sqrt();
                if c.x - r < -self.margin
                    || c.x + r > 1.0 + self.margin
                    || c.y - r < -self.margin
                    || c.y + r > 1.0 + self.margin
                {
                    return Ok(false);
                }
            }
        }
        self.tri = tri;
        self.copies = copies;
        self.central = central;
        Ok(true)
    }

    /// Labels of the Delaunay one-ring of a label's central copy, unsorted.
    fn ring(&self, label: u32) -> Vec<u32> {
        let v = self.tri.vertex(self.central[label as usize]);
        v.out_edges().map(|e| e.to().data().label).collect()
    }

    /// Clip the 1.5-box around the generator by the bisectors of the central
    /// copy's ring, visiting ring entries in a sorted order so the polygon is
    /// a pure function of the ring's label/position multiset.
    fn compute_own(&mut self, label: u32) -> Result<()> {
        let p = self.points[label as usize];
        let v = self.tri.vertex(self.central[label as usize]);
        let mut ring: Vec<(u32, Point)> = v
            .out_edges()
            .map(|e| {
                let to = e.to();
                let site = to.data();
                (site.label, Point::new(site.pos.x, site.pos.y))
            })
            .collect();
        ring.sort_by(|a, b| {
            (a.0, a.1.x.to_bits(), a.1.y.to_bits()).cmp(&(b.0, b.1.x.to_bits(), b.1.y.to_bits()))
        });
        let mut poly = TaggedPolygon::rect(p.x - 0.75, p.y - 0.75, p.x + 0.75, p.y + 0.75);
        for &(l, q) in &ring {
            poly.clip_bisector(p, q, EdgeTag::Neighbor(l));
        }
        if poly.touches_seed() || poly.is_empty() {
            return Err(GeometryError::DegenerateInput {
                labels: vec![label],
            });
        }
        self.own[label as usize] = poly.neighbor_labels().collect();
        self.polys[label as usize] = poly;
        Ok(())
    }

    fn finalize_cell(&self, label: u32) -> Result<Cell> {
        let poly = &self.polys[label as usize];
        let mut neighbors: BTreeSet<u32> = self.own[label as usize].clone();
        // symmetrise the neighbour relation across each pair
        for l in self.ring(label) {
            if self.own[l as usize].contains(&label) {
                neighbors.insert(l);
            }
        }
        neighbors.remove(&label);
        Ok(Cell {
            generator_id: label,
            area: poly.area(),
            neighbor_ids: neighbors.into_iter().collect(),
            touches_boundary: false,
            shape: CellShape::Polygon(poly.pts.clone()),
        })
    }

    /// Remove one copy, fixing up stored handles after spade's swap-removal
    /// (the last vertex slot is moved into the vacated one).
    fn remove_copy(&mut self, h: FixedVertexHandle) {
        self.tri.remove(h);
        let moved_old_index = self.tri.num_vertices();
        if h.index() < moved_old_index {
            let vertex = self.tri.vertex(h);
            let label = vertex.data().label as usize;
            let central = vertex.data().central;
            drop(vertex);
            for stored in &mut self.copies[label] {
                if stored.index() == moved_old_index {
                    *stored = h;
                }
            }
            if central {
                self.central[label] = h;
            }
        }
    }

    /// True when every circumdisk of a face incident to the label's central
    /// copy lies inside the replicated band.
    fn central_star_certified(&self, label: u32) -> bool {
        if self.margin >= 2.0 {
            return true;
        }
        let v = self.tri.vertex(self.central[label as usize]);
        for edge in v.out_edges() {
            if let Some(face) = edge.face().as_inner() {
                let (c, r_sq) = face.circumcircle();
                let r = r_sq.max(0.0).sqrt();
                if c.x - r < -self.margin
                    || c.x + r > 1.0 + self.margin
                    || c.y - r < -self.margin
                    || c.y + r > 1.0 + self.margin
                {
                    return false;
                }
            }
        }
        true
    }

    fn rebuild_and_diff(&mut self, cells: &mut [Cell], changed: &mut Vec<u32>) -> Result<()> {
        self.full_rebuild()?;
        for label in 0..self.points.len() as u32 {
            let cell = self.finalize_cell(label)?;
            if cell != cells[label as usize] {
                changed.push(label);
                cells[label as usize] = cell;
            }
        }
        Ok(())
    }

    pub fn replace(&mut self, cells: &mut [Cell], id: u32, p: Point) -> Result<Vec<u32>> {
        let p = Point::new(p.x.rem_euclid(1.0), p.y.rem_euclid(1.0));
        for (j, &q) in self.points.iter().enumerate() {
            if j != id as usize && torus_dist_sq(p, q) < MIN_SEPARATION * MIN_SEPARATION {
                return Err(GeometryError::TooClose { existing: j as u32 });
            }
        }
        let old = self.points[id as usize];

        let mut changed: Vec<u32> = vec![id];
        while let Some(h) = self.copies[id as usize].pop() {
            let v = self.tri.vertex(h);
            changed.extend(v.out_edges().map(|e| e.to().data().label));
            self.remove_copy(h);
        }
        self.points[id as usize] = p;

        let k = self.margin.ceil() as i32;
        let mut inserted = Vec::new();
        for oy in -k..=k {
            for ox in -k..=k {
                let q = Point::new(p.x + ox as f64, p.y + oy as f64);
                let is_central = ox == 0 && oy == 0;
                if !is_central && !self.band(q) {
                    continue;
                }
                let h = self
                    .tri
                    .insert(TorusSite {
                        pos: Point2::new(q.x, q.y),
                        label: id,
                        central: is_central,
                    })
                    .map_err(|_| GeometryError::DegenerateInput { labels: vec![id] })?;
                self.copies[id as usize].push(h);
                if is_central {
                    self.central[id as usize] = h;
                }
                inserted.push(h);
            }
        }
        for &h in &inserted {
            let v = self.tri.vertex(h);
            changed.extend(v.out_edges().map(|e| e.to().data().label));
        }
        changed.sort_unstable();
        changed.dedup();

        self.replacements += 1;
        if self.replacements >= REBUILD_PERIOD {
            self.replacements = 0;
            // a rebuild may re-resolve cocircular ties; fold any resulting
            // differences into the changed set
            if let Err(e) = self.rebuild_and_diff(cells, &mut changed) {
                self.points[id as usize] = old;
                self.full_rebuild()?;
                return Err(e);
            }
            changed.sort_unstable();
            changed.dedup();
            return Ok(changed);
        }

        if changed.iter().any(|&l| !self.central_star_certified(l)) {
            // a circumdisk escaped the band: fall back to a widening rebuild
            self.margin = (self.margin * 2.0).min(2.0);
            if let Err(e) = self.rebuild_and_diff(cells, &mut changed) {
                self.points[id as usize] = old;
                self.full_rebuild()?;
                return Err(e);
            }
            changed.sort_unstable();
            changed.dedup();
            return Ok(changed);
        }

        for &l in &changed {
            if let Err(e) = self.compute_own(l) {
                self.points[id as usize] = old;
                self.full_rebuild()?;
                return Err(e);
            }
        }
        for &l in &changed {
            cells[l as usize] = self.finalize_cell(l)?;
        }
        Ok(changed)
    }
}
