//! Planar geometry and distance metrics.
//!
//! Coordinates are projected kilometres. Distances between data points and
//! candidate knots are either straight-line or geodesic, the latter being
//! shortest-path lengths on a lattice graph that routes around an exclusion
//! polygon.

mod distance;
mod features;
mod graph;
mod point;
mod polygon;
mod provider;

pub use distance::{euclidean_distances, DistanceMatrix, MetricTag};
pub use features::{distance_to_nearest_feature, Feature};
pub use graph::{
    build_grid_graph, geodesic_distances, GraphOptions, GridGraph, NodeKind, PathAlgorithm,
    DEFAULT_FLOYD_NODE_CAP,
};
pub use point::{Point, PointSet};
pub use polygon::{point_in_polygon, Polygon};
pub use provider::DistanceProvider;
