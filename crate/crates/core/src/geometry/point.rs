use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// An ordered collection of points with an optional per-point multiplicity.
///
/// Multiplicity records how many coincident records a point stands for (for
/// example duplicated presence locations collapsed by [`PointSet::dedup`]).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplicity: Option<Vec<usize>>,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} has non-finite coordinates")));
        }
        Ok(PointSet { points, multiplicity: None })
    }

    pub fn with_multiplicity(points: Vec<Point>, multiplicity: Vec<usize>) -> Result<Self> {
        if points.len() != multiplicity.len() {
            return Err(Error::invalid(format!(
                "{} points but {} multiplicities",
                points.len(),
                multiplicity.len()
            )));
        }
        let mut set = PointSet::new(points)?;
        set.multiplicity = Some(multiplicity);
        Ok(set)
    }

    pub fn from_xy(coords: &[(f64, f64)]) -> Result<Self> {
        PointSet::new(coords.iter().copied().map(Point::from).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn multiplicity(&self, i: usize) -> usize {
        self.multiplicity.as_ref().map_or(1, |m| m[i])
    }

    /// Sum of multiplicities.
    pub fn total_count(&self) -> usize {
        self.multiplicity.as_ref().map_or(self.points.len(), |m| m.iter().sum())
    }

    /// Collapses exactly coincident points, keeping first-occurrence order and
    /// accumulating multiplicity.
    pub fn dedup(&self) -> PointSet {
        let mut index = std::collections::HashMap::new();
        let mut points = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            let key = (p.x.to_bits(), p.y.to_bits());
            match index.get(&key) {
                Some(&j) => counts[j] += self.multiplicity(i),
                None => {
                    index.insert(key, points.len());
                    points.push(*p);
                    counts.push(self.multiplicity(i));
                }
            }
        }
        PointSet { points, multiplicity: Some(counts) }
    }

    /// Expands multiplicity into repeated points.
    pub fn expand(&self) -> PointSet {
        let mut points = Vec::with_capacity(self.total_count());
        for (i, p) in self.points.iter().enumerate() {
            points.extend(std::iter::repeat_n(*p, self.multiplicity(i)));
        }
        PointSet { points, multiplicity: None }
    }

    pub fn subset(&self, indices: &[usize]) -> PointSet {
        PointSet {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            multiplicity: self
                .multiplicity
                .as_ref()
                .map(|m| indices.iter().map(|&i| m[i]).collect()),
        }
    }

    /// Concatenates two sets; multiplicities default to one where absent.
    pub fn concat(&self, other: &PointSet) -> PointSet {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let multiplicity = if self.multiplicity.is_none() && other.multiplicity.is_none() {
            None
        } else {
            Some(
                (0..self.len())
                    .map(|i| self.multiplicity(i))
                    .chain((0..other.len()).map(|i| other.multiplicity(i)))
                    .collect(),
            )
        };
        PointSet { points, multiplicity }
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bbox(&self) -> Option<(Point, Point)> {
        let first = self.points.first()?;
        let mut lo = *first;
        let mut hi = *first;
        for p in &self.points[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Some((lo, hi))
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.points.len() as f64;
        let (sx, sy) = self.points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some(Point::new(sx / n, sy / n))
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_accumulates_multiplicity() {
        let set = PointSet::from_xy(&[(0.0, 0.0), (1.0, 1.0), (0.0, 0.0), (0.0, 0.0)]).unwrap();
        let unique = set.dedup();
        assert_eq!(unique.len(), 2);
        assert_eq!(unique.multiplicity(0), 3);
        assert_eq!(unique.multiplicity(1), 1);
        assert_eq!(unique.total_count(), 4);
        assert_eq!(unique.expand().len(), 4);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointSet::from_xy(&[(f64::NAN, 0.0)]).is_err());
    }
}
