use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use super::distance::{DistanceMatrix, MetricTag};
use super::point::{Point, PointSet};
use super::polygon::{point_in_polygon, Polygon};
use crate::error::{Error, Result};

pub const DEFAULT_FLOYD_NODE_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Lattice node outside the exclusion polygon.
    Grid,
    /// Off-lattice node joined to nearby lattice nodes.
    Attached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathAlgorithm {
    Floyd,
    Dijkstra,
}

#[derive(Debug, Clone)]
pub struct GraphOptions {
    /// 4 or 8.
    pub connectivity: u8,
    /// Number of nearest lattice nodes an extra point is joined to.
    pub attach_k: usize,
    /// Extra points farther than this from every lattice node are unreachable.
    pub max_attach_distance: Option<f64>,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { connectivity: 8, attach_k: 4, max_attach_distance: None }
    }
}

/// Undirected lattice graph with Euclidean edge lengths.
///
/// Lattice nodes falling inside the exclusion polygon are dropped, as are
/// diagonal edges whose midpoint falls inside it. Extra points that coincide
/// with a retained lattice node reuse that node; all others become attached
/// nodes linked to their nearest lattice nodes.
#[derive(Debug, Clone)]
pub struct GridGraph {
    nodes: Vec<Point>,
    kinds: Vec<NodeKind>,
    adjacency: Vec<Vec<(usize, f64)>>,
    extra_nodes: Vec<usize>,
    excluded: usize,
}

impl GridGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn neighbours(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// Graph node standing for the `i`-th extra point passed at construction.
    pub fn extra_node(&self, i: usize) -> usize {
        self.extra_nodes[i]
    }

    pub fn extra_nodes(&self) -> &[usize] {
        &self.extra_nodes
    }

    /// Lattice nodes dropped by the exclusion polygon.
    pub fn excluded_count(&self) -> usize {
        self.excluded
    }

    /// Builds a graph directly from nodes and undirected edges.
    pub fn from_edges(nodes: Vec<Point>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in edges {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(Error::invalid(format!("edge ({a}, {b}) references a missing node")));
            }
            if a == b {
                continue;
            }
            let len = nodes[a].distance(&nodes[b]);
            adjacency[a].push((b, len));
            adjacency[b].push((a, len));
        }
        let kinds = vec![NodeKind::Grid; nodes.len()];
        Ok(GridGraph { nodes, kinds, adjacency, extra_nodes: Vec::new(), excluded: 0 })
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        let len = self.nodes[a].distance(&self.nodes[b]);
        self.adjacency[a].push((b, len));
        self.adjacency[b].push((a, len));
    }
}

/// Builds the lattice graph used for geodesic distances.
///
/// `grid` must lie on a regular lattice of the given `spacing`; its lattice
/// indices are recovered by rounding offsets from the bounding-box corner.
pub fn build_grid_graph(
    grid: &PointSet,
    spacing: f64,
    exclusion: Option<&Polygon>,
    options: &GraphOptions,
    extra: &PointSet,
) -> Result<GridGraph> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
    }
    if options.connectivity != 4 && options.connectivity != 8 {
        return Err(Error::invalid(format!("connectivity must be 4 or 8, got {}", options.connectivity)));
    }
    if options.attach_k == 0 {
        return Err(Error::invalid("attach_k must be at least 1"));
    }
    let (origin, _) = grid.bbox().ok_or_else(|| Error::invalid("grid has no points"))?;

    let mut nodes = Vec::new();
    let mut lattice: HashMap<(i64, i64), usize> = HashMap::new();
    let mut excluded = 0;
    for p in grid {
        let fi = (p.x - origin.x) / spacing;
        let fj = (p.y - origin.y) / spacing;
        let key = (fi.round() as i64, fj.round() as i64);
        if (fi - fi.round()).abs() > 1e-6 || (fj - fj.round()).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "grid point ({}, {}) is off the {spacing} km lattice",
                p.x, p.y
            )));
        }
        if exclusion.is_some_and(|poly| point_in_polygon(p, poly)) {
            excluded += 1;
            continue;
        }
        if lattice.contains_key(&key) {
            continue;
        }
        lattice.insert(key, nodes.len());
        nodes.push(*p);
    }

    let n_grid = nodes.len();
    let mut graph = GridGraph {
        kinds: vec![NodeKind::Grid; n_grid],
        adjacency: vec![Vec::new(); n_grid],
        nodes,
        extra_nodes: Vec::with_capacity(extra.len()),
        excluded,
    };

    let offsets: &[(i64, i64)] = if options.connectivity == 4 {
        &[(1, 0), (0, 1)]
    } else {
        &[(1, 0), (0, 1), (1, 1), (1, -1)]
    };
    let mut keys: Vec<_> = lattice.iter().map(|(k, v)| (*k, *v)).collect();
    keys.sort_unstable_by_key(|&(_, v)| v);
    for ((i, j), a) in keys {
        for &(di, dj) in offsets {
            if let Some(&b) = lattice.get(&(i + di, j + dj)) {
                if di != 0 && dj != 0 {
                    let (pa, pb) = (graph.nodes[a], graph.nodes[b]);
                    let mid = Point::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y));
                    if exclusion.is_some_and(|poly| point_in_polygon(&mid, poly)) {
                        continue;
                    }
                }
                graph.add_edge(a, b);
            }
        }
    }

    for p in extra {
        let fi = ((p.x - origin.x) / spacing).round();
        let fj = ((p.y - origin.y) / spacing).round();
        if let Some(&node) = lattice.get(&(fi as i64, fj as i64)) {
            if graph.nodes[node].distance(p) <= 1e-9 * spacing {
                graph.extra_nodes.push(node);
                continue;
            }
        }
        let mut nearest: Vec<(f64, usize)> = (0..n_grid)
            .map(|g| (graph.nodes[g].distance(p), g))
            .filter(|&(d, _)| options.max_attach_distance.is_none_or(|cap| d <= cap))
            .collect();
        if nearest.is_empty() {
            return Err(Error::UnreachableNode { x: p.x, y: p.y });
        }
        let k = options.attach_k.min(nearest.len());
        nearest.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        nearest.truncate(k);
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let id = graph.nodes.len();
        graph.nodes.push(*p);
        graph.kinds.push(NodeKind::Attached);
        graph.adjacency.push(Vec::new());
        for &(_, g) in &nearest {
            graph.add_edge(id, g);
        }
        graph.extra_nodes.push(id);
    }
    Ok(graph)
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(graph: &GridGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: source });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, len) in graph.neighbours(node) {
            let cand = d + len;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(HeapEntry { dist: cand, node: next });
            }
        }
    }
    dist
}

fn floyd(graph: &GridGraph) -> Vec<f64> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
        for &(j, len) in graph.neighbours(i) {
            if len < dist[i * n + j] {
                dist[i * n + j] = len;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if dik == f64::INFINITY {
                continue;
            }
            for j in 0..n {
                let cand = dik + dist[k * n + j];
                if cand < dist[i * n + j] {
                    dist[i * n + j] = cand;
                }
            }
        }
    }
    dist
}

/// Shortest-path distances from each `sources` node (rows) to each `targets`
/// node (columns).
///
/// Unreachable pairs are reported as `f64::INFINITY` with a logged warning.
pub fn geodesic_distances(
    graph: &GridGraph,
    sources: &[usize],
    targets: &[usize],
    algorithm: PathAlgorithm,
    floyd_node_cap: usize,
) -> Result<DistanceMatrix> {
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::invalid("geodesic distances need non-empty source and target sets"));
    }
    let n = graph.node_count();
    if let Some(bad) = sources.iter().chain(targets).find(|&&i| i >= n) {
        return Err(Error::invalid(format!("node {bad} is not in the graph ({n} nodes)")));
    }
    let mut values = Vec::with_capacity(sources.len() * targets.len());
    match algorithm {
        PathAlgorithm::Floyd => {
            if n > floyd_node_cap {
                return Err(Error::GraphTooLarge { nodes: n, cap: floyd_node_cap });
            }
            let all = floyd(graph);
            for &s in sources {
                values.extend(targets.iter().map(|&t| all[s * n + t]));
            }
        }
        PathAlgorithm::Dijkstra => {
            let rows: Vec<Vec<f64>> = sources
                .par_iter()
                .map(|&s| {
                    let d = dijkstra(graph, s);
                    targets.iter().map(|&t| d[t]).collect()
                })
                .collect();
            for row in rows {
                values.extend(row);
            }
        }
    }
    let unreachable = values.iter().filter(|v| v.is_infinite()).count();
    if unreachable > 0 {
        log::warn!("{unreachable} source/target pairs are unreachable; distances set to infinity");
    }
    DistanceMatrix::from_row_major(sources.len(), targets.len(), values, MetricTag::Geodesic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize, spacing: f64) -> PointSet {
        let mut pts = Vec::new();
        for j in 0..n {
            for i in 0..n {
                pts.push(Point::new(i as f64 * spacing, j as f64 * spacing));
            }
        }
        PointSet::new(pts).unwrap()
    }

    fn four() -> GraphOptions {
        GraphOptions { connectivity: 4, ..Default::default() }
    }

    #[test]
    fn three_by_three_four_connected_has_twelve_edges() {
        let g = build_grid_graph(&lattice(3, 1.0), 1.0, None, &four(), &PointSet::default()).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.edge_count(), 12);
    }

    #[test]
    fn excluded_center_leaves_eight_edges() {
        let hole = Polygon::from_coords(&[(0.9, 0.9), (1.1, 0.9), (1.1, 1.1), (0.9, 1.1)]).unwrap();
        let g = build_grid_graph(&lattice(3, 1.0), 1.0, Some(&hole), &four(), &PointSet::default()).unwrap();
        assert_eq!(g.node_count(), 8);
        assert_eq!(g.edge_count(), 8);
        assert_eq!(g.excluded_count(), 1);
    }

    #[test]
    fn eight_connected_edge_count() {
        // 12 axis edges plus 2 diagonals per cell over 4 cells.
        let g = build_grid_graph(&lattice(3, 1.0), 1.0, None, &GraphOptions::default(), &PointSet::default())
            .unwrap();
        assert_eq!(g.edge_count(), 20);
    }

    #[test]
    fn extras_attach_and_count() {
        let extra = PointSet::from_xy(&[(0.5, 0.5), (1.5, 0.25)]).unwrap();
        let g = build_grid_graph(&lattice(3, 1.0), 1.0, None, &four(), &extra).unwrap();
        assert_eq!(g.node_count(), 11);
        for i in 0..2 {
            let node = g.extra_node(i);
            assert_eq!(g.kind(node), NodeKind::Attached);
            assert_eq!(g.neighbours(node).len(), 4);
        }
    }

    #[test]
    fn coincident_extra_reuses_lattice_node() {
        let extra = PointSet::from_xy(&[(1.0, 2.0)]).unwrap();
        let g = build_grid_graph(&lattice(3, 1.0), 1.0, None, &four(), &extra).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.nodes()[g.extra_node(0)], Point::new(1.0, 2.0));
    }

    #[test]
    fn unreachable_extra_is_an_error() {
        let extra = PointSet::from_xy(&[(50.0, 50.0)]).unwrap();
        let opts = GraphOptions { max_attach_distance: Some(3.0), ..Default::default() };
        let err = build_grid_graph(&lattice(3, 1.0), 1.0, None, &opts, &extra).unwrap_err();
        assert!(matches!(err, Error::UnreachableNode { x, y } if x == 50.0 && y == 50.0));
    }

    #[test]
    fn path_graph_two_hops() {
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let g = GridGraph::from_edges(nodes, &[(0, 1), (1, 2)]).unwrap();
        for alg in [PathAlgorithm::Floyd, PathAlgorithm::Dijkstra] {
            let d = geodesic_distances(&g, &[0], &[2], alg, DEFAULT_FLOYD_NODE_CAP).unwrap();
            assert_eq!(d.get(0, 0), 2.0);
            assert_eq!(d.metric(), MetricTag::Geodesic);
        }
    }

    #[test]
    fn floyd_cap_enforced() {
        let g = build_grid_graph(&lattice(5, 1.0), 1.0, None, &GraphOptions::default(), &PointSet::default())
            .unwrap();
        let err = geodesic_distances(&g, &[0], &[1], PathAlgorithm::Floyd, 10).unwrap_err();
        assert!(matches!(err, Error::GraphTooLarge { nodes: 25, cap: 10 }));
    }

    #[test]
    fn disconnected_pairs_are_infinite() {
        let nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(5.0, 0.0)];
        let g = GridGraph::from_edges(nodes, &[(0, 1)]).unwrap();
        let d = geodesic_distances(&g, &[0], &[1, 2], PathAlgorithm::Dijkstra, 10).unwrap();
        assert_eq!(d.get(0, 0), 1.0);
        assert!(d.get(0, 1).is_infinite());
    }

    #[test]
    fn wall_forces_detour() {
        // 5x5 lattice with a wall at x=2 for y in 0..=3; going from (0,0) to (4,0)
        // must pass over the top of the wall.
        let wall = Polygon::from_coords(&[(1.9, -0.1), (2.1, -0.1), (2.1, 3.1), (1.9, 3.1)]).unwrap();
        let g = build_grid_graph(&lattice(5, 1.0), 1.0, Some(&wall), &four(), &PointSet::default()).unwrap();
        let a = g.nodes().iter().position(|p| *p == Point::new(0.0, 0.0)).unwrap();
        let b = g.nodes().iter().position(|p| *p == Point::new(4.0, 0.0)).unwrap();
        let d = geodesic_distances(&g, &[a], &[b], PathAlgorithm::Dijkstra, 100).unwrap();
        assert_eq!(d.get(0, 0), 12.0);
    }
}
