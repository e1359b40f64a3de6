//! Convex polygon clipping with edge provenance.
//!
//! Voronoi cells are built by successively clipping a seed polygon with
//! bisector half-planes. Each edge of the running polygon remembers what
//! produced it (a domain boundary side or a neighbouring generator), which
//! is what the clipped-adjacency and boundary-contact queries need.

use super::Point;

/// Squared length below which an edge is treated as degenerate.
const MIN_EDGE_LEN_SQ: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    /// Edge lies on the domain boundary (or the seed box, for the torus).
    Seed,
    /// Edge lies on the bisector against the generator with this label.
    Neighbor(u32),
}

/// Convex polygon as a CCW vertex ring; `tags[i]` describes the edge from
/// `pts[i]` to `pts[(i + 1) % len]`.
#[derive(Debug, Clone)]
pub struct TaggedPolygon {
    pub pts: Vec<Point>,
    pub tags: Vec<EdgeTag>,
}

impl TaggedPolygon {
    /// Axis-aligned box [x0,x1] x [y0,y1] with all edges tagged `Seed`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        TaggedPolygon {
            pts: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            tags: vec![EdgeTag::Seed; 4],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    /// Clip by the half-plane `a . z <= b`, tagging cut chords with `tag`.
    /// Sutherland-Hodgman on a convex ring.
    pub fn clip_halfplane(&mut self, a: Point, b: f64, tag: EdgeTag) {
        let n = self.pts.len();
        if n == 0 {
            return;
        }
        let side: Vec<f64> = self.pts.iter().map(|p| a.x * p.x + a.y * p.y - b).collect();
        if side.iter().all(|&s| s <= 0.0) {
            return;
        }
        let mut pts = Vec::with_capacity(n + 2);
        let mut tags = Vec::with_capacity(n + 2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (pi, pj) = (self.pts[i], self.pts[j]);
            let (si, sj) = (side[i], side[j]);
            let ti = self.tags[i];
            if si <= 0.0 {
                pts.push(pi);
                tags.push(ti);
                if sj > 0.0 {
                    // leaving: original edge is truncated, chord follows
                    let t = si / (si - sj);
                    pts.push(Point::new(
                        pi.x + t * (pj.x - pi.x),
                        pi.y + t * (pj.y - pi.y),
                    ));
                    tags.push(tag);
                }
            } else if sj <= 0.0 {
                // entering: remainder of the original edge survives
                let t = si / (si - sj);
                pts.push(Point::new(
                    pi.x + t * (pj.x - pi.x),
                    pi.y + t * (pj.y - pi.y),
                ));
                tags.push(ti);
            }
        }
        self.pts = pts;
        self.tags = tags;
        self.drop_degenerate_edges();
    }

    /// Keep `z` closer to `p` than to `q`: clip by the (p,q) bisector.
    pub fn clip_bisector(&mut self, p: Point, q: Point, tag: EdgeTag) {
        let a = Point::new(q.x - p.x, q.y - p.y);
        let b = 0.5 * (q.x * q.x + q.y * q.y - p.x * p.x - p.y * p.y);
        self.clip_halfplane(a, b, tag);
    }

    fn drop_degenerate_edges(&mut self) {
        let n = self.pts.len();
        if n < 3 {
            self.pts.clear();
            self.tags.clear();
            return;
        }
        let mut pts = Vec::with_capacity(n);
        let mut tags = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1) % n;
            let dx = self.pts[j].x - self.pts[i].x;
            let dy = self.pts[j].y - self.pts[i].y;
            if dx * dx + dy * dy > MIN_EDGE_LEN_SQ {
                pts.push(self.pts[i]);
                tags.push(self.tags[i]);
            }
        }
        if pts.len() < 3 {
            pts.clear();
            tags.clear();
        }
        self.pts = pts;
        self.tags = tags;
    }

    /// Shoelace area (positive for CCW rings).
    pub fn area(&self) -> f64 {
        shoelace(&self.pts)
    }

    /// Labels of neighbours that contribute an edge of positive length.
    pub fn neighbor_labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.tags.iter().filter_map(|t| match t {
            EdgeTag::Neighbor(l) => Some(*l),
            EdgeTag::Seed => None,
        })
    }

    /// True if an edge of positive length still lies on the seed boundary.
    pub fn touches_seed(&self) -> bool {
        self.tags.iter().any(|t| *t == EdgeTag::Seed)
    }
}

pub fn shoelace(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += pts[i].x * pts[j].y - pts[j].x * pts[i].y;
    }
    0.5 * acc
}
