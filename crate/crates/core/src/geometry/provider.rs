use super::distance::{euclidean_distances, DistanceMatrix, MetricTag};
use super::graph::{build_grid_graph, geodesic_distances, GraphOptions, PathAlgorithm, DEFAULT_FLOYD_NODE_CAP};
use super::point::PointSet;
use super::polygon::Polygon;
use crate::error::{Error, Result};

/// Precomputed distances from every data point and every candidate knot to
/// every candidate knot, under one metric.
#[derive(Debug, Clone)]
pub struct DistanceProvider {
    pub data_to_candidates: DistanceMatrix,
    pub candidates_to_candidates: DistanceMatrix,
}

impl DistanceProvider {
    pub fn new(data_to_candidates: DistanceMatrix, candidates_to_candidates: DistanceMatrix) -> Result<Self> {
        if data_to_candidates.cols() != candidates_to_candidates.cols()
            || candidates_to_candidates.rows() != candidates_to_candidates.cols()
        {
            return Err(Error::invalid("distance provider matrices have inconsistent shapes"));
        }
        if data_to_candidates.metric() != candidates_to_candidates.metric() {
            return Err(Error::invalid("distance provider matrices use different metrics"));
        }
        Ok(DistanceProvider { data_to_candidates, candidates_to_candidates })
    }

    pub fn metric(&self) -> MetricTag {
        self.data_to_candidates.metric()
    }

    pub fn euclidean(data: &PointSet, candidates: &PointSet) -> Result<Self> {
        DistanceProvider::new(euclidean_distances(data, candidates)?, euclidean_distances(candidates, candidates)?)
    }

    /// Geodesic distances on a lattice graph built from `grid` (regular at
    /// `spacing`) with `exclusion` removed. Data points and candidates are
    /// attached to the graph as extra nodes.
    pub fn geodesic(
        data: &PointSet,
        candidates: &PointSet,
        grid: &PointSet,
        spacing: f64,
        exclusion: Option<&Polygon>,
        options: &GraphOptions,
    ) -> Result<Self> {
        let extras = candidates.concat(data);
        let graph = build_grid_graph(grid, spacing, exclusion, options, &extras)?;
        let cand_nodes: Vec<usize> = (0..candidates.len()).map(|i| graph.extra_node(i)).collect();
        let data_nodes: Vec<usize> = (0..data.len()).map(|i| graph.extra_node(candidates.len() + i)).collect();
        // Rows are candidate sources; transposing gives data rows.
        let from_cand = geodesic_distances(&graph, &cand_nodes, &data_nodes, PathAlgorithm::Dijkstra, DEFAULT_FLOYD_NODE_CAP)?;
        let cc = geodesic_distances(&graph, &cand_nodes, &cand_nodes, PathAlgorithm::Dijkstra, DEFAULT_FLOYD_NODE_CAP)?;
        DistanceProvider::new(from_cand.transpose(), cc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn geodesic_provider_routes_around_wall() {
        let mut grid = Vec::new();
        for j in 0..=10 {
            for i in 0..=10 {
                grid.push(Point::new(i as f64, j as f64));
            }
        }
        let grid = PointSet::new(grid).unwrap();
        let wall = Polygon::from_coords(&[(4.5, -1.0), (5.5, -1.0), (5.5, 8.5), (4.5, 8.5)]).unwrap();
        let cands = PointSet::from_xy(&[(2.0, 2.0), (8.0, 2.0)]).unwrap();
        let data = PointSet::from_xy(&[(2.0, 2.0), (8.0, 2.0), (2.5, 2.5)]).unwrap();
        let geo = DistanceProvider::geodesic(&data, &cands, &grid, 1.0, Some(&wall), &GraphOptions::default()).unwrap();
        let euc = DistanceProvider::euclidean(&data, &cands).unwrap();
        assert_eq!(geo.metric(), MetricTag::Geodesic);
        assert_eq!(geo.data_to_candidates.get(0, 0), 0.0);
        assert!(geo.data_to_candidates.get(0, 1) > euc.data_to_candidates.get(0, 1) + 5.0);
        for i in 0..3 {
            for j in 0..2 {
                assert!(geo.data_to_candidates.get(i, j) >= euc.data_to_candidates.get(i, j) - 1e-12);
            }
        }
        assert!(geo.candidates_to_candidates.max_asymmetry().unwrap() < 1e-9);
    }
}
