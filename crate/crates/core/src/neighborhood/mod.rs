//! k-nearest-neighbor graphs and radius queries.

mod kdtree;

use rayon::prelude::*;

pub use kdtree::KdTree;

use crate::error::{arg_err, Error, Result};
use crate::Vec3;

/// Undirected weighted graph stored as a canonical edge list (`u < v`,
/// lexicographically sorted, no duplicates).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

/// Compressed adjacency lists: neighbors of `v` are
/// `neighbors[offsets[v]..offsets[v + 1]]`, paired with the edge id.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub offsets: Vec<usize>,
    pub neighbors: Vec<usize>,
    pub edge_ids: Vec<usize>,
}

impl Adjacency {
    pub fn of(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.neighbors[r.clone()].iter().copied().zip(self.edge_ids[r].iter().copied())
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }
}

impl WeightedGraph {
    /// Builds a graph from arbitrary pairs. Pairs are canonicalized and
    /// duplicates merged by summing their weights.
    pub fn from_pairs(
        node_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for (u, v, w) in pairs {
            if u >= node_count || v >= node_count {
                return arg_err(format!("edge ({u},{v}) out of range for {node_count} nodes"));
            }
            if u == v {
                return arg_err(format!("self-loop on node {u}"));
            }
            if !(w.is_finite() && w >= 0.0) {
                return arg_err(format!("edge ({u},{v}) has invalid weight {w}"));
            }
            list.push((u.min(v), u.max(v), w));
        }
        list.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(list.len());
        let mut weights: Vec<f64> = Vec::with_capacity(list.len());
        for (u, v, w) in list {
            if edges.last() == Some(&(u, v)) {
                *weights.last_mut().unwrap() += w;
            } else {
                edges.push((u, v));
                weights.push(w);
            }
        }
        Ok(WeightedGraph { node_count, edges, weights })
    }

    /// Graph where every listed pair is an edge of weight 1, duplicates
    /// merged without accumulating.
    pub fn unit_from_pairs(
        node_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = Self::from_pairs(node_count, pairs.into_iter().map(|(u, v)| (u, v, 1.0)))?;
        g.weights.iter_mut().for_each(|w| *w = 1.0);
        Ok(g)
    }

    pub fn empty(node_count: usize) -> Self {
        WeightedGraph { node_count, edges: Vec::new(), weights: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn adjacency(&self) -> Adjacency {
        let n = self.node_count;
        let mut deg = vec![0usize; n + 1];
        for &(u, v) in &self.edges {
            deg[u + 1] += 1;
            deg[v + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let offsets = deg.clone();
        let mut cursor = deg;
        let mut neighbors = vec![0; 2 * self.edges.len()];
        let mut edge_ids = vec![0; 2 * self.edges.len()];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            neighbors[cursor[u]] = v;
            edge_ids[cursor[u]] = e;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            edge_ids[cursor[v]] = e;
            cursor[v] += 1;
        }
        Adjacency { offsets, neighbors, edge_ids }
    }

    /// Connected component id of each node (ids follow the smallest member).
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.node_count];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.node_count {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for (u, _) in adj.of(v) {
                    if comp[u] == usize::MAX {
                        comp[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

/// Row-major table of `k` neighbor indices per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    pub k: usize,
    pub indices: Vec<u32>,
}

impl NeighborTable {
    pub fn row(&self, p: usize) -> &[u32] {
        &self.indices[p * self.k..(p + 1) * self.k]
    }

    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.indices.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// First `k` columns, which are the `k` nearest neighbors under the same
    /// ordering.
    pub fn truncate(&self, k: usize) -> NeighborTable {
        assert!(k <= self.k);
        let indices = self.indices.chunks(self.k).flat_map(|r| r[..k].iter().copied()).collect();
        NeighborTable { k, indices }
    }
}

/// Row `p` lists the `k` nearest neighbors of point `p` (itself excluded),
/// ascending by distance, ties to the smaller index.
pub fn knn_indices(positions: &[Vec3], k: usize) -> Result<NeighborTable> {
    let n = positions.len();
    if k == 0 || k >= n {
        return arg_err(format!("k must satisfy 1 <= k < N (k={k}, N={n})"));
    }
    let tree = KdTree::new(positions);
    let mut indices = vec![0u32; n * k];
    indices.par_chunks_mut(k).enumerate().for_each(|(p, row)| {
        let nn = tree.knn(&positions[p], k, Some(p as u32));
        for (slot, (id, _)) in row.iter_mut().zip(nn) {
            *slot = id;
        }
    });
    Ok(NeighborTable { k, indices })
}

/// Union-symmetrized k-NN graph with unit weights.
pub fn build_knn_graph(positions: &[Vec3], k: usize) -> Result<WeightedGraph> {
    if positions.len() < 2 {
        return arg_err("k-NN graph needs at least two points");
    }
    let table = knn_indices(positions, k)?;
    knn_graph_from_table(&table)
}

pub fn knn_graph_from_table(table: &NeighborTable) -> Result<WeightedGraph> {
    let n = table.len();
    let pairs = (0..n).flat_map(|p| table.row(p).iter().map(move |&q| (p, q as usize)));
    WeightedGraph::unit_from_pairs(n, pairs)
}

/// For each query, the indices of all points within `radius`, ascending.
pub fn neighbors_within(positions: &[Vec3], queries: &[Vec3], radius: f64) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0) {
        return Err(Error::Argument(format!("radius must be positive, got {radius}")));
    }
    let tree = KdTree::new(positions);
    Ok(queries.par_iter().map(|q| tree.within(q, radius)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = crate::util::rng(seed);
        (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()
    }

    fn brute_knn(pts: &[Vec3], p: usize, k: usize) -> Vec<u32> {
        let mut all: Vec<(f64, usize)> = (0..pts.len())
            .filter(|&q| q != p)
            .map(|q| {
                let d = [pts[p][0] - pts[q][0], pts[p][1] - pts[q][1], pts[p][2] - pts[q][2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2], q)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all[..k].iter().map(|&(_, q)| q as u32).collect()
    }

    #[test]
    fn collinear_k1_merges_duplicate_pairs() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let g = build_knn_graph(&pts, 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn two_nodes_single_edge() {
        let g = build_knn_graph(&[[0.0; 3], [0.0, 0.0, 1.0]], 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.weights(), &[1.0]);
    }

    #[test]
    fn k_too_large_rejected() {
        assert!(matches!(knn_indices(&random_points(5, 1), 5), Err(Error::Argument(_))));
        assert!(matches!(knn_indices(&random_points(5, 1), 0), Err(Error::Argument(_))));
    }

    #[test]
    fn unit_square_two_edge_adjacent_corners() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let t = knn_indices(&pts, 2).unwrap();
        assert_eq!(t.row(0), &[1, 3]);
        assert_eq!(t.row(1), &[0, 2]);
        assert_eq!(t.row(2), &[1, 3]);
        assert_eq!(t.row(3), &[0, 2]);
    }

    #[test]
    fn duplicates_come_first() {
        let pts = [[0.0; 3], [1.0, 0.0, 0.0], [0.0; 3], [0.5, 0.0, 0.0]];
        let t = knn_indices(&pts, 2).unwrap();
        assert_eq!(t.row(0), &[2, 3]);
        assert_eq!(t.row(2), &[0, 3]);
    }

    #[test]
    fn knn_table_matches_brute_force() {
        let pts = random_points(300, 7);
        let t = knn_indices(&pts, 50).unwrap();
        for p in 0..pts.len() {
            assert_eq!(t.row(p), brute_knn(&pts, p, 50).as_slice(), "row {p}");
        }
    }

    #[test]
    fn knn_graph_matches_brute_force() {
        let pts = random_points(500, 11);
        let g = build_knn_graph(&pts, 10).unwrap();
        let mut expected = std::collections::BTreeSet::new();
        for p in 0..pts.len() {
            for q in brute_knn(&pts, p, 10) {
                let q = q as usize;
                expected.insert((p.min(q), p.max(q)));
            }
        }
        let got: Vec<_> = g.edges().to_vec();
        assert_eq!(got, expected.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn grid_ties_resolved_by_index() {
        // integer lattice produces many exact distance ties
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let t = knn_indices(&pts, 7).unwrap();
        for p in 0..pts.len() {
            assert_eq!(t.row(p), brute_knn(&pts, p, 7).as_slice());
        }
    }

    #[test]
    fn within_radius_cases() {
        let pts = random_points(400, 3);
        let hits = neighbors_within(&pts, &[pts[17]], 1e-9).unwrap();
        assert_eq!(hits[0], vec![17]);
        assert!(matches!(neighbors_within(&pts, &[pts[0]], 0.0), Err(Error::Argument(_))));

        let queries = random_points(40, 4);
        let got = neighbors_within(&pts, &queries, 0.2).unwrap();
        for (q, hits) in queries.iter().zip(&got) {
            let brute: Vec<usize> = (0..pts.len())
                .filter(|&i| crate::util::dist2(q, &pts[i]) <= 0.04)
                .collect();
            assert_eq!(hits, &brute);
        }
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(WeightedGraph::from_pairs(3, [(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_pairs(3, [(0, 3, 1.0)]).is_err());
        assert!(WeightedGraph::from_pairs(3, [(0, 1, -1.0)]).is_err());
        let g = WeightedGraph::from_pairs(3, [(1, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.weights(), &[3.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn knn_graph_order_independent(seed in 0u64..1000, n in 12usize..80) {
                let pts = random_points(n, seed);
                let g = build_knn_graph(&pts, 4).unwrap();
                // reverse the point order, build again, relabel back
                let rev: Vec<Vec3> = pts.iter().rev().copied().collect();
                let g2 = build_knn_graph(&rev, 4).unwrap();
                let relabeled = WeightedGraph::unit_from_pairs(
                    n,
                    g2.edges().iter().map(|&(u, v)| (n - 1 - u, n - 1 - v)),
                ).unwrap();
                prop_assert_eq!(g.edges(), relabeled.edges());
                let adj = g.adjacency();
                for v in 0..n {
                    prop_assert!(adj.degree(v) >= 4);
                }
            }
        }
    }
}
