use serde::{Deserialize, Serialize};

use super::point::{Point, PointSet};
use crate::error::{Error, Result};

/// A map feature used for distance-to-feature covariates (waterholes, roads).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feature {
    Point(Point),
    Polyline(Vec<Point>),
}

impl Feature {
    pub fn distance_to(&self, p: &Point) -> f64 {
        match self {
            Feature::Point(q) => p.distance(q),
            Feature::Polyline(vertices) => match vertices.as_slice() {
                [] => f64::INFINITY,
                [only] => p.distance(only),
                _ => vertices
                    .windows(2)
                    .map(|s| point_segment_distance(p, &s[0], &s[1]))
                    .fold(f64::INFINITY, f64::min),
            },
        }
    }
}

fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// Minimum Euclidean distance from each point to any feature.
pub fn distance_to_nearest_feature(points: &PointSet, features: &[Feature]) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(Error::invalid("distance to nearest feature needs at least one feature"));
    }
    if features.iter().any(|f| matches!(f, Feature::Polyline(v) if v.is_empty())) {
        return Err(Error::invalid("polyline feature has no vertices"));
    }
    Ok(points
        .iter()
        .map(|p| features.iter().map(|f| f.distance_to(p)).fold(f64::INFINITY, f64::min))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_feature() {
        let pts = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let d = distance_to_nearest_feature(&pts, &[Feature::Point(Point::new(0.0, 3.0))]).unwrap();
        assert_eq!(d, vec![3.0]);
    }

    #[test]
    fn segment_projection() {
        let pts = PointSet::from_xy(&[(1.0, 1.0), (3.0, 0.0), (2.0, 0.0)]).unwrap();
        let road = Feature::Polyline(vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0)]);
        let d = distance_to_nearest_feature(&pts, &[road]).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn nearest_of_several() {
        let pts = PointSet::from_xy(&[(10.0, 0.0)]).unwrap();
        let feats = [
            Feature::Point(Point::new(0.0, 0.0)),
            Feature::Polyline(vec![Point::new(9.0, -5.0), Point::new(9.0, 5.0)]),
        ];
        assert_eq!(distance_to_nearest_feature(&pts, &feats).unwrap(), vec![1.0]);
    }

    #[test]
    fn empty_features_rejected() {
        let pts = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        assert!(distance_to_nearest_feature(&pts, &[]).is_err());
    }
}
