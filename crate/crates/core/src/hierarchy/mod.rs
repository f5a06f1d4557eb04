//! Recursive multi-level partition and reduced component graphs.

mod container;

pub use container::{read_sph1, write_sph1, Sph1};

use crate::cut_pursuit::{minimize_l0_weighted, Partition, SolverConfig};
use crate::error::{arg_err, Error, Result};
use crate::neighborhood::WeightedGraph;
use crate::util::dist2;
use crate::Vec3;

/// One level `Pᵢ` (i ≥ 1) of a hierarchical partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// Parent of each level-(i−1) element.
    pub super_index: Vec<usize>,
    pub centroids: Vec<Vec3>,
    /// Row-major `S × dim`, point-count-weighted means of the children.
    pub mean_features: Vec<f64>,
    pub point_counts: Vec<usize>,
    /// Largest distance from a member point to the centroid.
    pub radii: Vec<f64>,
}

impl Level {
    pub fn component_count(&self) -> usize {
        self.point_counts.len()
    }

    pub fn element_count(&self) -> usize {
        self.super_index.len()
    }
}

/// Nested partitions `P0 ⊑ P1 ⊑ … ⊑ P_I`; `P0` is the point set itself.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalPartition {
    point_count: usize,
    feature_dim: usize,
    levels: Vec<Level>,
}

impl HierarchicalPartition {
    /// Assembles a hierarchy from levels, checking the nesting shapes.
    pub fn from_levels(point_count: usize, feature_dim: usize, levels: Vec<Level>) -> Result<Self> {
        let mut prev = point_count;
        for (i, l) in levels.iter().enumerate() {
            let s = l.component_count();
            if l.super_index.len() != prev {
                return arg_err(format!("level {} indexes {} elements, expected {prev}", i + 1, l.super_index.len()));
            }
            if l.centroids.len() != s || l.radii.len() != s || l.mean_features.len() != s * feature_dim {
                return arg_err(format!("level {} has inconsistent per-component arrays", i + 1));
            }
            let mut seen = vec![false; s];
            for &c in &l.super_index {
                if c >= s {
                    return arg_err(format!("level {} parent id {c} out of range", i + 1));
                }
                seen[c] = true;
            }
            if seen.iter().any(|x| !x) {
                return arg_err(format!("level {} parent map is not surjective", i + 1));
            }
            prev = s;
        }
        Ok(HierarchicalPartition { point_count, feature_dim, levels })
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Number of levels `I` above the points.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Level `i` for `1 ≤ i ≤ I`.
    pub fn level(&self, i: usize) -> &Level {
        assert!(i >= 1 && i <= self.levels.len(), "level {i} out of range");
        &self.levels[i - 1]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Number of elements of `Pᵢ`, `i = 0` being the points.
    pub fn size(&self, i: usize) -> usize {
        if i == 0 {
            self.point_count
        } else {
            self.level(i).component_count()
        }
    }

    /// Composed map from points to their level-`i` component.
    pub fn point_to_level(&self, i: usize) -> Vec<usize> {
        let mut map: Vec<usize> = (0..self.point_count).collect();
        for l in &self.levels[..i] {
            for m in map.iter_mut() {
                *m = l.super_index[*m];
            }
        }
        map
    }

    /// Level-(i−1) children of every level-`i` component, ascending.
    pub fn children(&self, i: usize) -> Vec<Vec<usize>> {
        let l = self.level(i);
        let mut ch = vec![Vec::new(); l.component_count()];
        for (e, &p) in l.super_index.iter().enumerate() {
            ch[p].push(e);
        }
        ch
    }

    /// Renames level-`i` components: component `c` becomes `perm[c]`.
    pub fn relabel(&self, i: usize, perm: &[usize]) -> Result<Self> {
        let s = self.size(i);
        check_permutation(perm, s)?;
        let mut out = self.clone();
        let d = self.feature_dim;
        let old = self.level(i);
        let new = &mut out.levels[i - 1];
        for (e, c) in new.super_index.iter_mut().enumerate() {
            *c = perm[old.super_index[e]];
        }
        for c in 0..s {
            let t = perm[c];
            new.centroids[t] = old.centroids[c];
            new.point_counts[t] = old.point_counts[c];
            new.radii[t] = old.radii[c];
            new.mean_features[t * d..(t + 1) * d].copy_from_slice(&old.mean_features[c * d..(c + 1) * d]);
        }
        if i < self.level_count() {
            let above = &self.levels[i].super_index;
            for c in 0..s {
                out.levels[i].super_index[perm[c]] = above[c];
            }
        }
        Ok(out)
    }

    /// Points contained in every level-`i` component, ascending.
    pub fn point_members(&self, i: usize) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.size(i)];
        for (p, c) in self.point_to_level(i).into_iter().enumerate() {
            m[c].push(p);
        }
        m
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&t| t >= n || std::mem::replace(&mut seen[t], true)) {
        return arg_err(format!("not a permutation of {n} elements"));
    }
    Ok(())
}

/// Graph over partition components; edge weights sum the crossing weights.
pub fn reduce_graph(graph: &WeightedGraph, partition: &Partition) -> WeightedGraph {
    let idx = partition.super_index();
    let pairs = graph
        .edges()
        .iter()
        .zip(graph.weights())
        .filter(|((u, v), _)| idx[*u] != idx[*v])
        .map(|(&(u, v), &w)| (idx[u], idx[v], w));
    WeightedGraph::from_pairs(partition.component_count(), pairs).expect("reduced graph of a valid graph")
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    /// `λ₁ … λ_I`.
    pub lambdas: Vec<f64>,
    pub solver: SolverConfig,
    /// Scale each element's fidelity by its point count at levels ≥ 2.
    pub weighted_fidelity: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig { lambdas: vec![1.0], solver: SolverConfig::default(), weighted_fidelity: true }
    }
}

/// Computes `P1 … P_I` by repeatedly solving the ℓ0 problem on the current
/// level's mean features over its reduced graph.
pub fn build_hierarchy(
    f: &[f64],
    dim: usize,
    graph: &WeightedGraph,
    positions: &[Vec3],
    config: &HierarchyConfig,
) -> Result<HierarchicalPartition> {
    let n = positions.len();
    if config.lambdas.is_empty() {
        return arg_err("at least one lambda is required");
    }
    if config.lambdas.iter().any(|&l| !(l > 0.0)) {
        return arg_err("lambdas must be > 0");
    }
    if graph.node_count() != n || f.len() != n * dim {
        return arg_err("features, graph and positions disagree on the point count");
    }

    let mut levels = Vec::with_capacity(config.lambdas.len());
    let mut feats = f.to_vec();
    let mut counts: Vec<usize> = vec![1; n];
    let mut current_graph = graph.clone();
    let mut point_map: Vec<usize> = (0..n).collect();
    for &lambda in &config.lambdas {
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let solver = SolverConfig { lambda, ..config.solver.clone() };
        let w = config.weighted_fidelity.then_some(weights.as_slice());
        let partition = minimize_l0_weighted(&feats, dim, w, &current_graph, &solver)?;
        let s = partition.component_count();
        let idx = partition.super_index();

        let mut point_counts = vec![0usize; s];
        let mut mean_features = vec![0.0; s * dim];
        for (e, &c) in idx.iter().enumerate() {
            point_counts[c] += counts[e];
            for d in 0..dim {
                mean_features[c * dim + d] += counts[e] as f64 * feats[e * dim + d];
            }
        }
        for c in 0..s {
            let inv = 1.0 / point_counts[c] as f64;
            mean_features[c * dim..(c + 1) * dim].iter_mut().for_each(|x| *x *= inv);
        }

        for m in point_map.iter_mut() {
            *m = idx[*m];
        }
        let (centroids, radii) = centroids_and_radii(positions, &point_map, s);

        current_graph = reduce_graph(&current_graph, &partition);
        levels.push(Level {
            super_index: idx.to_vec(),
            centroids,
            mean_features: mean_features.clone(),
            point_counts: point_counts.clone(),
            radii,
        });
        feats = mean_features;
        counts = point_counts;
    }
    Ok(HierarchicalPartition { point_count: n, feature_dim: dim, levels })
}

pub(crate) fn centroids_and_radii(positions: &[Vec3], point_map: &[usize], s: usize) -> (Vec<Vec3>, Vec<f64>) {
    let mut sums = vec![[0.0; 3]; s];
    let mut cnt = vec![0usize; s];
    for (p, &c) in positions.iter().zip(point_map) {
        for d in 0..3 {
            sums[c][d] += p[d];
        }
        cnt[c] += 1;
    }
    let centroids: Vec<Vec3> = sums
        .iter()
        .zip(&cnt)
        .map(|(s, &k)| if k > 0 { s.map(|x| x / k as f64) } else { [0.0; 3] })
        .collect();
    let mut radii = vec![0.0f64; s];
    for (p, &c) in positions.iter().zip(point_map) {
        radii[c] = radii[c].max(dist2(p, &centroids[c]));
    }
    radii.iter_mut().for_each(|r| *r = r.sqrt());
    (centroids, radii)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub lambda: f64,
    pub component_count: usize,
    /// `N / component_count`.
    pub ratio: f64,
}

/// Bisection on `log λ` for a single-level partition with `N / |P| ≈ target_ratio`.
///
/// Stops once the component count is within `tol` (relative) of
/// `N / target_ratio`, or after 20 steps, returning the closest λ seen.
pub fn tune_lambda(
    f: &[f64],
    dim: usize,
    graph: &WeightedGraph,
    target_ratio: f64,
    bounds: (f64, f64),
    tol: f64,
    solver: &SolverConfig,
) -> Result<TuneResult> {
    let (mut lo, mut hi) = bounds;
    if !(target_ratio > 1.0) {
        return arg_err(format!("target ratio must exceed 1, got {target_ratio}"));
    }
    if !(lo > 0.0 && lo < hi) {
        return arg_err(format!("invalid lambda bounds ({lo}, {hi})"));
    }
    let n = graph.node_count();
    let target = n as f64 / target_ratio;
    let count = |lambda: f64| -> Result<usize> {
        let cfg = SolverConfig { lambda, ..solver.clone() };
        Ok(minimize_l0_weighted(f, dim, None, graph, &cfg)?.component_count())
    };
    let result = |lambda: f64, c: usize| TuneResult { lambda, component_count: c, ratio: n as f64 / c as f64 };
    let miss = |c: usize| (c as f64 - target).abs() / target;

    let (c_lo, c_hi) = (count(lo)?, count(hi)?);
    if c_lo == c_hi {
        return Err(Error::NonBracketing { count: c_lo });
    }
    let mut best = if miss(c_lo) <= miss(c_hi) { result(lo, c_lo) } else { result(hi, c_hi) };
    if miss(best.component_count) <= tol {
        return Ok(best);
    }
    // coarseness grows with lambda; keep the observed trend if it is inverted
    let increasing = c_lo >= c_hi;
    for _ in 0..20 {
        let mid = (lo.ln() * 0.5 + hi.ln() * 0.5).exp();
        let c = count(mid)?;
        if miss(c) < miss(best.component_count) {
            best = result(mid, c);
        }
        if miss(c) <= tol {
            break;
        }
        let too_fine = c as f64 > target;
        if too_fine == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> WeightedGraph {
        WeightedGraph::unit_from_pairs(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn reduce_identity_and_all_in_one() {
        let g = WeightedGraph::from_pairs(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 1.5)]).unwrap();
        let f = [0.0; 4];
        let id = Partition::identity(&f, 1);
        assert_eq!(reduce_graph(&g, &id), g);
        let one = Partition::from_labels(&[0, 0, 0, 0], &f, 1, None);
        assert_eq!(reduce_graph(&g, &one).edge_count(), 0);
        let two = Partition::from_labels(&[0, 0, 1, 1], &f, 1, None);
        let r = reduce_graph(&g, &two);
        assert_eq!(r.edges(), &[(0, 1)]);
        assert_eq!(r.weights(), &[3.5]);
    }

    #[test]
    fn single_level_huge_lambda() {
        let n = 10;
        let g = path(n);
        let pos: Vec<Vec3> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let f: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
        let cfg = HierarchyConfig { lambdas: vec![1e6], ..Default::default() };
        let h = build_hierarchy(&f, 1, &g, &pos, &cfg).unwrap();
        assert_eq!(h.level_count(), 1);
        assert_eq!(h.level(1).component_count(), 1);
        assert!((h.level(1).centroids[0][0] - 4.5).abs() < 1e-12);
        assert!((h.level(1).radii[0] - 4.5).abs() < 1e-12);
        assert_eq!(h.level(1).point_counts, vec![10]);
    }

    #[test]
    fn rejects_bad_lambdas() {
        let g = path(3);
        let pos = vec![[0.0; 3]; 3];
        let cfg = HierarchyConfig { lambdas: vec![], ..Default::default() };
        assert!(build_hierarchy(&[0.0; 3], 1, &g, &pos, &cfg).is_err());
        let cfg = HierarchyConfig { lambdas: vec![0.0], ..Default::default() };
        assert!(build_hierarchy(&[0.0; 3], 1, &g, &pos, &cfg).is_err());
    }

    #[test]
    fn tune_rejects_ratio_one() {
        let g = path(4);
        let r = tune_lambda(&[0.0; 4], 1, &g, 1.0, (0.1, 1.0), 0.1, &SolverConfig::default());
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn tune_non_bracketing() {
        let g = path(4);
        let r = tune_lambda(&[1.0; 4], 1, &g, 2.0, (0.1, 1.0), 0.1, &SolverConfig::default());
        assert!(matches!(r, Err(Error::NonBracketing { count: 1 })));
    }
}
