use serde::{Deserialize, Serialize};

use super::point::Point;
use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-12;

/// A planar region bounded by one or more closed rings.
///
/// Membership uses the even-odd rule across all rings, so holes and
/// multi-part regions are both expressed as extra rings. Every ring is stored
/// closed (first vertex repeated at the end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    rings: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<Point>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::DegeneratePolygon("polygon has no rings".into()));
        }
        let mut closed = Vec::with_capacity(rings.len());
        for (r, mut ring) in rings.into_iter().enumerate() {
            if ring.iter().any(|p| !p.is_finite()) {
                return Err(Error::DegeneratePolygon(format!("ring {r} has non-finite vertices")));
            }
            if ring.len() >= 2 && ring.first() == ring.last() {
                ring.pop();
            }
            let mut distinct: Vec<Point> = Vec::new();
            for p in &ring {
                if !distinct.contains(p) {
                    distinct.push(*p);
                }
            }
            if distinct.len() < 3 {
                return Err(Error::DegeneratePolygon(format!(
                    "ring {r} has {} distinct vertices, need at least 3",
                    distinct.len()
                )));
            }
            ring.push(ring[0]);
            if signed_area(&ring).abs() <= f64::EPSILON * bbox_scale(&ring) {
                return Err(Error::DegeneratePolygon(format!("ring {r} is collinear")));
            }
            closed.push(ring);
        }
        Ok(Polygon { rings: closed })
    }

    /// Single-ring polygon from vertex coordinates.
    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Polygon::new(vec![coords.iter().copied().map(Point::from).collect()])
    }

    /// Axis-aligned rectangle.
    pub fn rectangle(min: Point, max: Point) -> Result<Self> {
        Polygon::from_coords(&[(min.x, min.y), (max.x, min.y), (max.x, max.y), (min.x, max.y)])
    }

    /// Adds a ring (hole or additional part).
    pub fn with_ring(mut self, ring: Vec<Point>) -> Result<Self> {
        let extra = Polygon::new(vec![ring])?;
        self.rings.extend(extra.rings);
        Ok(self)
    }

    pub fn rings(&self) -> &[Vec<Point>] {
        &self.rings
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.rings.iter().flatten() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Enclosed area; rings nested at odd depth count as holes.
    pub fn area(&self) -> f64 {
        self.rings
            .iter()
            .enumerate()
            .map(|(i, ring)| {
                let depth = self
                    .rings
                    .iter()
                    .enumerate()
                    .filter(|&(j, other)| j != i && strictly_inside_ring(&ring[0], other))
                    .count();
                let a = signed_area(ring).abs();
                if depth % 2 == 0 {
                    a
                } else {
                    -a
                }
            })
            .sum()
    }

    pub fn contains(&self, p: &Point) -> bool {
        point_in_polygon(p, self)
    }
}

/// Even-odd membership test. Points on any ring edge count as inside.
pub fn point_in_polygon(p: &Point, poly: &Polygon) -> bool {
    if poly.rings.iter().any(|ring| on_ring(p, ring)) {
        return true;
    }
    poly.rings.iter().filter(|ring| crosses_odd(p, ring)).count() % 2 == 1
}

fn strictly_inside_ring(p: &Point, ring: &[Point]) -> bool {
    !on_ring(p, ring) && crosses_odd(p, ring)
}

fn crosses_odd(p: &Point, ring: &[Point]) -> bool {
    let mut inside = false;
    for edge in ring.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_ring(p: &Point, ring: &[Point]) -> bool {
    let tol = EDGE_EPS * bbox_scale(ring).max(1.0);
    ring.windows(2).any(|e| on_segment(p, &e[0], &e[1], tol))
}

fn on_segment(p: &Point, a: &Point, b: &Point, tol: f64) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let len = a.distance(b);
    if cross.abs() > tol * len.max(1.0) {
        return false;
    }
    p.x >= a.x.min(b.x) - tol
        && p.x <= a.x.max(b.x) + tol
        && p.y >= a.y.min(b.y) - tol
        && p.y <= a.y.max(b.y) + tol
}

fn signed_area(ring: &[Point]) -> f64 {
    0.5 * ring.windows(2).map(|e| e[0].x * e[1].y - e[1].x * e[0].y).sum::<f64>()
}

fn bbox_scale(ring: &[Point]) -> f64 {
    let (mut w, mut h) = (0.0f64, 0.0f64);
    if let Some(first) = ring.first() {
        for p in ring {
            w = w.max((p.x - first.x).abs());
            h = h.max((p.y - first.y).abs());
        }
    }
    (w * w).max(h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn interior_and_exterior() {
        let sq = unit_square();
        assert!(point_in_polygon(&Point::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(&Point::new(2.0, 2.0), &sq));
    }

    #[test]
    fn hole_excludes_center() {
        let holed = unit_square()
            .with_ring(vec![
                Point::new(0.25, 0.25),
                Point::new(0.75, 0.25),
                Point::new(0.75, 0.75),
                Point::new(0.25, 0.75),
            ])
            .unwrap();
        assert!(!point_in_polygon(&Point::new(0.5, 0.5), &holed));
        assert!(point_in_polygon(&Point::new(0.1, 0.1), &holed));
        assert!((holed.area() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn boundary_counts_as_inside() {
        let sq = unit_square();
        assert!(point_in_polygon(&Point::new(0.0, 0.5), &sq));
        assert!(point_in_polygon(&Point::new(1.0, 1.0), &sq));
        assert!(point_in_polygon(&Point::new(0.5, 1.0), &sq));
    }

    #[test]
    fn collinear_ring_rejected() {
        let err = Polygon::from_coords(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap_err();
        assert!(matches!(err, Error::DegeneratePolygon(_)));
        assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn closure_normalized() {
        let closed =
            Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)]).unwrap();
        let ring = &closed.rings()[0];
        assert_eq!(ring.len(), 4);
        assert_eq!(ring.first(), ring.last());
        assert!((closed.area() - 0.5).abs() < 1e-12);
    }
}
