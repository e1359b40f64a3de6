//! 1-D tessellation of the unit-circumference circle. Cells are arcs whose
//! endpoints are the midpoints to the cyclic neighbours, so maintenance under
//! replacement is purely local.

use std::collections::BTreeMap;

use super::{Cell, CellShape, GeometryError, Point, Result, MIN_SEPARATION};

/// Positions live in [0,1), so their IEEE bit patterns order like the values
/// and can key a BTreeMap.
fn key(x: f64) -> u64 {
    debug_assert!((0.0..1.0).contains(&x));
    x.to_bits()
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Widths of the circle cells for sorted positions: half the sum of the two
/// adjacent gaps.
pub fn circle_cells(positions: &[f64]) -> Result<Vec<f64>> {
    let n = positions.len();
    if n == 0 {
        return Err(GeometryError::TooFewPoints {
            kind: super::DomainKind::Circle,
            needed: 1,
            got: 0,
        });
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    for i in 0..n {
        let next = positions[(i + 1) % n];
        if circ_dist(positions[i], next) < MIN_SEPARATION {
            return Err(GeometryError::DegenerateInput {
                labels: vec![i as u32, ((i + 1) % n) as u32],
            });
        }
    }
    let mut widths = Vec::with_capacity(n);
    for i in 0..n {
        let prev = positions[(i + n - 1) % n];
        let next = positions[(i + 1) % n];
        let gap_l = (positions[i] - prev).rem_euclid(1.0);
        let gap_r = (next - positions[i]).rem_euclid(1.0);
        widths.push(0.5 * (gap_l + gap_r));
    }
    Ok(widths)
}

pub(super) struct CircleEngine {
    positions: Vec<f64>,
    order: BTreeMap<u64, u32>,
}

impl CircleEngine {
    pub fn build(points: &[Point]) -> Result<(Self, Vec<Cell>)> {
        let positions: Vec<f64> = points.iter().map(|p| p.x.rem_euclid(1.0)).collect();
        let mut order = BTreeMap::new();
        for (i, &x) in positions.iter().enumerate() {
            if let Some(other) = order.insert(key(x), i as u32) {
                return Err(GeometryError::DegenerateInput {
                    labels: vec![other, i as u32],
                });
            }
        }
        let engine = CircleEngine { positions, order };
        // adjacent gaps must respect the minimum separation, wrap included
        let labels: Vec<u32> = engine.order.values().copied().collect();
        if labels.len() > 1 {
            for w in 0..labels.len() {
                let a = labels[w];
                let b = labels[(w + 1) % labels.len()];
                if circ_dist(engine.positions[a as usize], engine.positions[b as usize])
                    < MIN_SEPARATION
                {
                    return Err(GeometryError::DegenerateInput {
                        labels: vec![a, b],
                    });
                }
            }
        }
        let cells = (0..engine.positions.len() as u32)
            .map(|i| engine.make_cell(i))
            .collect();
        Ok((engine, cells))
    }

    pub fn position(&self, i: usize) -> Option<f64> {
        self.positions.get(i).copied()
    }

    /// Cyclic predecessor and successor labels of position `x`, excluding no
    /// one; with a single stored point both are that point.
    fn flanks(&self, x: f64) -> (u32, u32) {
        let succ = self
            .order
            .range((std::ops::Bound::Excluded(key(x)), std::ops::Bound::Unbounded))
            .next()
            .or_else(|| self.order.iter().next())
            .map(|(_, &l)| l)
            .expect("non-empty order");
        let pred = self
            .order
            .range(..key(x))
            .next_back()
            .or_else(|| self.order.iter().next_back())
            .map(|(_, &l)| l)
            .expect("non-empty order");
        (pred, succ)
    }

    fn make_cell(&self, id: u32) -> Cell {
        let x = self.positions[id as usize];
        if self.order.len() == 1 {
            return Cell {
                generator_id: id,
                area: 1.0,
                neighbor_ids: Vec::new(),
                touches_boundary: false,
                shape: CellShape::Interval {
                    start: (x + 0.5).rem_euclid(1.0),
                    width: 1.0,
                },
            };
        }
        let (pred, succ) = self.flanks(x);
        let gap_l = (x - self.positions[pred as usize]).rem_euclid(1.0);
        let gap_r = (self.positions[succ as usize] - x).rem_euclid(1.0);
        let width = 0.5 * (gap_l + gap_r);
        let mut neighbor_ids = vec![pred, succ];
        neighbor_ids.sort_unstable();
        neighbor_ids.dedup();
        Cell {
            generator_id: id,
            area: width,
            neighbor_ids,
            touches_boundary: false,
            shape: CellShape::Interval {
                start: (x - 0.5 * gap_l).rem_euclid(1.0),
                width,
            },
        }
    }

    pub fn replace(&mut self, cells: &mut [Cell], id: u32, x: f64) -> Result<Vec<u32>> {
        let x = x.rem_euclid(1.0);
        let old_x = self.positions[id as usize];
        let (old_pred, old_succ) = self.flanks(old_x);
        self.order.remove(&key(old_x));
        if !self.order.is_empty() {
            let (pred, succ) = self.flanks(x);
            for other in [pred, succ] {
                if circ_dist(x, self.positions[other as usize]) < MIN_SEPARATION {
                    self.order.insert(key(old_x), id);
                    return Err(GeometryError::TooClose { existing: other });
                }
            }
        }
        self.positions[id as usize] = x;
        self.order.insert(key(x), id);
        let (new_pred, new_succ) = self.flanks(x);
        let mut changed = vec![id, old_pred, old_succ, new_pred, new_succ];
        changed.sort_unstable();
        changed.dedup();
        changed.retain(|&l| l != id);
        changed.insert(0, id);
        for &l in &changed {
            cells[l as usize] = self.make_cell(l);
        }
        Ok(changed)
    }
}
