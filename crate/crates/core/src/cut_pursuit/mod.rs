//! ℓ0 piecewise-constant approximation of a graph signal by cut pursuit.
//!
//! Minimizes `‖e − f‖² + λ Σ w_uv [e_u ≠ e_v]` over signals `e` that are
//! constant on connected components. The solver alternates binary graph-cut
//! splits of each component with a greedy merge of adjacent components.

mod brute;
mod maxflow;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use rayon::prelude::*;

pub use brute::{brute_force_partition, brute_force_partition_weighted, BRUTE_FORCE_MAX_NODES};
pub use maxflow::MaxFlow;

use crate::error::{arg_err, Result};
use crate::neighborhood::{Adjacency, WeightedGraph};

/// Assignment of graph nodes to components with per-component mean values.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    super_index: Vec<usize>,
    /// Row-major `S × dim`.
    values: Vec<f64>,
    dim: usize,
    sizes: Vec<usize>,
}

impl Partition {
    /// Builds a partition from arbitrary labels. Components are renumbered in
    /// order of first appearance and valued by the (weighted) member mean.
    pub fn from_labels(labels: &[usize], f: &[f64], dim: usize, weights: Option<&[f64]>) -> Self {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let super_index: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = remap.len();
                *remap.entry(l).or_insert(next)
            })
            .collect();
        Self::from_canonical(super_index, remap.len(), f, dim, weights)
    }

    fn from_canonical(
        super_index: Vec<usize>,
        count: usize,
        f: &[f64],
        dim: usize,
        weights: Option<&[f64]>,
    ) -> Self {
        let mut values = vec![0.0; count * dim];
        let mut wsum = vec![0.0; count];
        let mut sizes = vec![0usize; count];
        for (v, &c) in super_index.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[v]);
            wsum[c] += w;
            sizes[c] += 1;
            for d in 0..dim {
                values[c * dim + d] += w * f[v * dim + d];
            }
        }
        for c in 0..count {
            let inv = if wsum[c] > 0.0 { 1.0 / wsum[c] } else { 0.0 };
            for d in 0..dim {
                values[c * dim + d] *= inv;
            }
        }
        Partition { super_index, values, dim, sizes }
    }

    /// Each node in its own component.
    pub fn identity(f: &[f64], dim: usize) -> Self {
        let n = if dim == 0 { 0 } else { f.len() / dim };
        Partition { super_index: (0..n).collect(), values: f.to_vec(), dim, sizes: vec![1; n] }
    }

    pub fn super_index(&self) -> &[usize] {
        &self.super_index
    }

    pub fn node_count(&self) -> usize {
        self.super_index.len()
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, c: usize) -> &[f64] {
        &self.values[c * self.dim..(c + 1) * self.dim]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Member node lists, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (v, &c) in self.super_index.iter().enumerate() {
            m[c].push(v);
        }
        m
    }

    /// The piecewise-constant signal `e` this partition encodes.
    pub fn signal(&self) -> Vec<f64> {
        self.super_index.iter().flat_map(|&c| self.value(c).iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_outer_iters: usize,
    pub split_inner_iters: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { lambda: 1.0, max_outer_iters: 10, split_inner_iters: 2, seed: 0, parallel: true }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig { lambda, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return arg_err(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if self.max_outer_iters == 0 || self.split_inner_iters == 0 {
            return arg_err("iteration counts must be >= 1");
        }
        Ok(())
    }
}

fn check_shapes(f: &[f64], dim: usize, graph: &WeightedGraph) -> Result<()> {
    if dim == 0 || f.len() != graph.node_count() * dim {
        return arg_err(format!(
            "signal of length {} does not match {} nodes × {dim}",
            f.len(),
            graph.node_count()
        ));
    }
    Ok(())
}

/// Energy of an arbitrary signal `e`; two nodes count as separated when
/// their rows differ.
pub fn energy(e: &[f64], f: &[f64], dim: usize, graph: &WeightedGraph, lambda: f64) -> Result<f64> {
    check_shapes(f, dim, graph)?;
    if e.len() != f.len() {
        return arg_err("signal shapes differ");
    }
    let fid: f64 = e.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
    let row = |v: usize| &e[v * dim..(v + 1) * dim];
    let cut: f64 = graph
        .edges()
        .iter()
        .zip(graph.weights())
        .filter(|((u, v), _)| row(*u) != row(*v))
        .map(|(_, w)| w)
        .sum();
    Ok(fid + lambda * cut)
}

/// Energy of a partition, separation decided by component ids.
pub fn partition_energy(
    p: &Partition,
    f: &[f64],
    graph: &WeightedGraph,
    lambda: f64,
    weights: Option<&[f64]>,
) -> f64 {
    let dim = p.dim;
    let mut fid = 0.0;
    for (v, &c) in p.super_index.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[v]);
        let val = p.value(c);
        let mut s = 0.0;
        for d in 0..dim {
            let r = val[d] - f[v * dim + d];
            s += r * r;
        }
        fid += w * s;
    }
    let cut: f64 = graph
        .edges()
        .iter()
        .zip(graph.weights())
        .filter(|((u, v), _)| p.super_index[*u] != p.super_index[*v])
        .map(|(_, w)| w)
        .sum();
    fid + lambda * cut
}

pub fn minimize_l0(f: &[f64], dim: usize, graph: &WeightedGraph, config: &SolverConfig) -> Result<Partition> {
    Ok(minimize_l0_traced(f, dim, None, graph, config)?.0)
}

pub fn minimize_l0_weighted(
    f: &[f64],
    dim: usize,
    weights: Option<&[f64]>,
    graph: &WeightedGraph,
    config: &SolverConfig,
) -> Result<Partition> {
    Ok(minimize_l0_traced(f, dim, weights, graph, config)?.0)
}

/// Above this size the greedy merge of the level sets is skipped; from a
/// near-identity start it is quadratic in the largest component degree.
const MERGE_CANDIDATE_MAX_NODES: usize = 50_000;

/// Like [`minimize_l0_weighted`], also returning the energy after each outer
/// iteration (first entry: the initial one-component-per-connected-part state).
pub fn minimize_l0_traced(
    f: &[f64],
    dim: usize,
    weights: Option<&[f64]>,
    graph: &WeightedGraph,
    config: &SolverConfig,
) -> Result<(Partition, Vec<f64>)> {
    config.validate()?;
    check_shapes(f, dim, graph)?;
    if let Some(w) = weights {
        if w.len() != graph.node_count() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return arg_err("node weights must be finite, >= 0 and one per node");
        }
    }
    let lambda = config.lambda;
    let level_set = level_set_partition(f, dim, graph, weights);
    if lambda == 0.0 {
        let e = partition_energy(&level_set, f, graph, 0.0, weights);
        return Ok((level_set, vec![e]));
    }

    let mut solver = Solver::new(f, dim, weights, graph, config);
    let mut trace = vec![solver.energy()];
    for iter in 0..config.max_outer_iters {
        let split = solver.split(iter);
        let merged = solver.merge();
        let e = solver.energy();
        debug_assert!(
            e <= trace.last().unwrap() + 1e-9 * trace.last().unwrap().abs().max(1.0),
            "energy increased: {} -> {e}",
            trace.last().unwrap()
        );
        trace.push(e);
        if !split && !merged {
            break;
        }
    }
    let mut best = solver.into_partition();
    let mut e_best = partition_energy(&best, f, graph, lambda, weights);
    // the solver is a heuristic: also try greedy merging of the level sets,
    // which wins when f is already nearly piecewise constant
    let mut candidates = Vec::with_capacity(2);
    if graph.node_count() <= MERGE_CANDIDATE_MAX_NODES {
        let mut merged = Solver::new(f, dim, weights, graph, config);
        merged.set_members(level_set.members());
        merged.merge();
        candidates.push(merged.into_partition());
    }
    candidates.push(level_set);
    for candidate in candidates {
        let e = partition_energy(&candidate, f, graph, lambda, weights);
        if e < e_best {
            best = candidate;
            e_best = e;
            trace.push(e);
        }
    }
    Ok((best, trace))
}

/// Connected components of the subgraph of edges joining equal rows of `f`.
fn level_set_partition(f: &[f64], dim: usize, graph: &WeightedGraph, weights: Option<&[f64]>) -> Partition {
    let row = |v: usize| &f[v * dim..(v + 1) * dim];
    let pairs = graph.edges().iter().filter(|&&(u, v)| row(u) == row(v)).map(|&(u, v)| (u, v));
    let g = WeightedGraph::unit_from_pairs(graph.node_count(), pairs).expect("subgraph of a valid graph");
    let (labels, _) = g.connected_components();
    Partition::from_labels(&labels, f, dim, weights)
}

struct Solver<'a> {
    f: &'a [f64],
    dim: usize,
    weights: Option<&'a [f64]>,
    graph: &'a WeightedGraph,
    adj: Adjacency,
    config: &'a SolverConfig,
    /// Component of each node; components are numbered by smallest member.
    comp: Vec<usize>,
    members: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, PartialEq)]
struct MergeCandidate {
    gain: f64,
    a: usize,
    b: usize,
    va: u32,
    vb: u32,
}

impl Eq for MergeCandidate {}

impl Ord for MergeCandidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.gain
            .total_cmp(&o.gain)
            .then_with(|| o.a.cmp(&self.a))
            .then_with(|| o.b.cmp(&self.b))
    }
}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<'a> Solver<'a> {
    fn new(
        f: &'a [f64],
        dim: usize,
        weights: Option<&'a [f64]>,
        graph: &'a WeightedGraph,
        config: &'a SolverConfig,
    ) -> Self {
        let (comp, count) = graph.connected_components();
        let mut members = vec![Vec::new(); count];
        for (v, &c) in comp.iter().enumerate() {
            members[c].push(v);
        }
        Solver { f, dim, weights, graph, adj: graph.adjacency(), config, comp, members }
    }

    #[inline]
    fn w(&self, v: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[v])
    }

    #[inline]
    fn row(&self, v: usize) -> &[f64] {
        &self.f[v * self.dim..(v + 1) * self.dim]
    }

    fn mean(&self, nodes: &[usize]) -> (Vec<f64>, f64) {
        let mut m = vec![0.0; self.dim];
        let mut ws = 0.0;
        for &v in nodes {
            let w = self.w(v);
            ws += w;
            for (acc, x) in m.iter_mut().zip(self.row(v)) {
                *acc += w * x;
            }
        }
        if ws > 0.0 {
            m.iter_mut().for_each(|x| *x /= ws);
        }
        (m, ws)
    }

    fn sq(&self, v: usize, c: &[f64]) -> f64 {
        self.row(v).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn fidelity(&self, nodes: &[usize], value: &[f64]) -> f64 {
        nodes.iter().map(|&v| self.w(v) * self.sq(v, value)).sum()
    }

    fn energy(&self) -> f64 {
        let fid: f64 = self
            .members
            .iter()
            .map(|m| {
                let (mu, _) = self.mean(m);
                self.fidelity(m, &mu)
            })
            .sum();
        let cut: f64 = self
            .graph
            .edges()
            .iter()
            .zip(self.graph.weights())
            .filter(|((u, v), _)| self.comp[*u] != self.comp[*v])
            .map(|(_, w)| w)
            .sum();
        fid + self.config.lambda * cut
    }

    /// Tries to split every component; returns whether any split was kept.
    fn split(&mut self, iter: usize) -> bool {
        let mut local = vec![0u32; self.comp.len()];
        for m in &self.members {
            for (i, &v) in m.iter().enumerate() {
                local[v] = i as u32;
            }
        }
        let this = &*self;
        let task = |(c, m): (usize, &Vec<usize>)| this.split_component(c, m, &local, iter);
        let results: Vec<Option<Vec<Vec<usize>>>> = if self.config.parallel {
            self.members.par_iter().enumerate().map(task).collect()
        } else {
            self.members.iter().enumerate().map(task).collect()
        };
        if results.iter().all(Option::is_none) {
            return false;
        }
        let mut next: Vec<Vec<usize>> = Vec::with_capacity(self.members.len());
        for (m, r) in std::mem::take(&mut self.members).into_iter().zip(results) {
            match r {
                Some(pieces) => next.extend(pieces),
                None => next.push(m),
            }
        }
        self.set_members(next);
        true
    }

    fn set_members(&mut self, mut members: Vec<Vec<usize>>) {
        members.sort_unstable_by_key(|m| m[0]);
        for (c, m) in members.iter().enumerate() {
            for &v in m {
                self.comp[v] = c;
            }
        }
        self.members = members;
    }

    fn split_component(&self, c: usize, nodes: &[usize], local: &[u32], iter: usize) -> Option<Vec<Vec<usize>>> {
        let n = nodes.len();
        if n < 2 {
            return None;
        }
        let lambda = self.config.lambda;
        // 2-means seeding: farthest point from a seeded member, then farthest from that
        let mut rng = crate::util::rng(
            self.config.seed ^ (iter as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (nodes[0] as u64).rotate_left(29),
        );
        let start = nodes[rng.gen_range(0..n)];
        let farthest = |from: usize| {
            let fr = self.row(from).to_vec();
            let mut best = (nodes[0], -1.0);
            for &v in nodes {
                let d = self.sq(v, &fr);
                if d > best.1 {
                    best = (v, d);
                }
            }
            best
        };
        let (a, _) = farthest(start);
        let (b, dab) = farthest(a);
        if !(dab > 0.0) {
            return None;
        }
        let mut centers = [self.row(a).to_vec(), self.row(b).to_vec()];

        let mut internal: Vec<(u32, u32, f64)> = Vec::new();
        for &v in nodes {
            for (u, e) in self.adj.of(v) {
                if u > v && self.comp[u] == c {
                    internal.push((local[v], local[u], self.graph.weights()[e]));
                }
            }
        }

        let mut labels = vec![false; n];
        for _ in 0..self.config.split_inner_iters {
            let mut mf = MaxFlow::new(n, internal.len());
            for (i, &v) in nodes.iter().enumerate() {
                let w = self.w(v);
                let c0 = w * self.sq(v, &centers[0]);
                let c1 = w * self.sq(v, &centers[1]);
                // sink side = label 1
                mf.add_terminal(i, c1, c0);
            }
            for &(i, j, w) in &internal {
                mf.add_edge(i as usize, j as usize, lambda * w, lambda * w);
            }
            mf.solve();
            for (i, l) in labels.iter_mut().enumerate() {
                *l = mf.is_sink_side(i);
            }
            let ones: Vec<usize> = nodes.iter().zip(&labels).filter(|(_, &l)| l).map(|(&v, _)| v).collect();
            if ones.is_empty() || ones.len() == n {
                return None;
            }
            let zeros: Vec<usize> = nodes.iter().zip(&labels).filter(|(_, &l)| !l).map(|(&v, _)| v).collect();
            let (m0, w0) = self.mean(&zeros);
            let (m1, w1) = self.mean(&ones);
            if w0 == 0.0 || w1 == 0.0 {
                break;
            }
            centers = [m0, m1];
        }

        // pieces: connected components of same-label internal edges
        let mut piece = vec![u32::MAX; n];
        let mut pieces: Vec<Vec<usize>> = Vec::new();
        let mut stack = Vec::new();
        for s in 0..n {
            if piece[s] != u32::MAX {
                continue;
            }
            let id = pieces.len() as u32;
            piece[s] = id;
            stack.push(s);
            let mut list = Vec::new();
            while let Some(i) = stack.pop() {
                let v = nodes[i];
                list.push(v);
                for (u, _) in self.adj.of(v) {
                    if self.comp[u] != c {
                        continue;
                    }
                    let j = local[u] as usize;
                    if piece[j] == u32::MAX && labels[j] == labels[i] {
                        piece[j] = id;
                        stack.push(j);
                    }
                }
            }
            list.sort_unstable();
            pieces.push(list);
        }
        if pieces.len() < 2 {
            return None;
        }
        let (mu, _) = self.mean(nodes);
        let old = self.fidelity(nodes, &mu);
        let mut new: f64 = pieces
            .iter()
            .map(|p| {
                let (m, _) = self.mean(p);
                self.fidelity(p, &m)
            })
            .sum();
        for &(i, j, w) in &internal {
            if piece[i as usize] != piece[j as usize] {
                new += lambda * w;
            }
        }
        if new < old - 1e-12 * old.abs() {
            Some(pieces)
        } else {
            None
        }
    }

    /// Greedy merging of adjacent components while it lowers the energy.
    fn merge(&mut self) -> bool {
        let lambda = self.config.lambda;
        let k = self.members.len();
        let dim = self.dim;
        let mut sums = vec![0.0; k * dim];
        let mut wsum = vec![0.0; k];
        for (c, m) in self.members.iter().enumerate() {
            for &v in m {
                let w = self.w(v);
                wsum[c] += w;
                for d in 0..dim {
                    sums[c * dim + d] += w * self.f[v * dim + d];
                }
            }
        }
        let mut nbrs: Vec<HashMap<usize, f64>> = vec![HashMap::new(); k];
        for (&(u, v), &w) in self.graph.edges().iter().zip(self.graph.weights()) {
            let (a, b) = (self.comp[u], self.comp[v]);
            if a != b {
                *nbrs[a].entry(b).or_insert(0.0) += w;
                *nbrs[b].entry(a).or_insert(0.0) += w;
            }
        }
        let gain = |a: usize, b: usize, w_ab: f64, sums: &[f64], wsum: &[f64]| -> f64 {
            let (wa, wb) = (wsum[a], wsum[b]);
            if wa + wb == 0.0 {
                return lambda * w_ab;
            }
            let mut d2 = 0.0;
            for d in 0..dim {
                let ma = if wa > 0.0 { sums[a * dim + d] / wa } else { 0.0 };
                let mb = if wb > 0.0 { sums[b * dim + d] / wb } else { 0.0 };
                d2 += (ma - mb) * (ma - mb);
            }
            lambda * w_ab - wa * wb / (wa + wb) * d2
        };
        let mut version = vec![0u32; k];
        let mut heap = BinaryHeap::new();
        for a in 0..k {
            for (&b, &w) in &nbrs[a] {
                if a < b {
                    let g = gain(a, b, w, &sums, &wsum);
                    if g > 0.0 {
                        heap.push(MergeCandidate { gain: g, a, b, va: 0, vb: 0 });
                    }
                }
            }
        }
        let mut parent: Vec<usize> = (0..k).collect();
        let mut merged_any = false;
        let compact_at = 4 * heap.len().max(1024);
        while let Some(MergeCandidate { a, b, va, vb, .. }) = heap.pop() {
            if heap.len() > compact_at {
                heap.retain(|m| version[m.a] == m.va && version[m.b] == m.vb);
            }
            if parent[a] != a || parent[b] != b || version[a] != va || version[b] != vb {
                continue;
            }
            // absorb b into a (a < b)
            merged_any = true;
            parent[b] = a;
            wsum[a] += wsum[b];
            for d in 0..dim {
                sums[a * dim + d] += sums[b * dim + d];
            }
            version[a] += 1;
            version[b] += 1;
            let nb = std::mem::take(&mut nbrs[b]);
            nbrs[a].remove(&b);
            for (x, w) in nb {
                if x == a {
                    continue;
                }
                *nbrs[a].entry(x).or_insert(0.0) += w;
                let nx = &mut nbrs[x];
                nx.remove(&b);
                *nx.entry(a).or_insert(0.0) += w;
            }
            let mut keys: Vec<(usize, f64)> = nbrs[a].iter().map(|(&x, &w)| (x, w)).collect();
            keys.sort_unstable_by_key(|e| e.0);
            for (x, w) in keys {
                let g = gain(a, x, w, &sums, &wsum);
                if g > 0.0 {
                    let (lo, hi) = (a.min(x), a.max(x));
                    heap.push(MergeCandidate { gain: g, a: lo, b: hi, va: version[lo], vb: version[hi] });
                }
            }
        }
        if !merged_any {
            return false;
        }
        let find = |mut c: usize| {
            while parent[c] != c {
                c = parent[c];
            }
            c
        };
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (c, m) in std::mem::take(&mut self.members).into_iter().enumerate() {
            groups.entry(find(c)).or_default().extend(m);
        }
        let members: Vec<Vec<usize>> = groups
            .into_values()
            .map(|mut m| {
                m.sort_unstable();
                m
            })
            .collect();
        self.set_members(members);
        true
    }

    fn into_partition(self) -> Partition {
        let count = self.members.len();
        Partition::from_canonical(self.comp, count, self.f, self.dim, self.weights).canonical()
    }
}

impl Partition {
    /// Same partition with ids renumbered by first appearance.
    pub fn canonical(self) -> Partition {
        let dim = self.dim;
        let mut map = vec![usize::MAX; self.sizes.len()];
        let mut next = 0;
        for &c in &self.super_index {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
        }
        let mut values = vec![0.0; self.values.len()];
        let mut sizes = vec![0; self.sizes.len()];
        for (old, &new) in map.iter().enumerate() {
            if new != usize::MAX {
                values[new * dim..(new + 1) * dim].copy_from_slice(&self.values[old * dim..(old + 1) * dim]);
                sizes[new] = self.sizes[old];
            }
        }
        values.truncate(next * dim);
        sizes.truncate(next);
        let super_index = self.super_index.iter().map(|&c| map[c]).collect();
        Partition { super_index, values, dim, sizes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn path(n: usize) -> WeightedGraph {
        WeightedGraph::unit_from_pairs(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn two_node_energies() {
        let g = path(2);
        let f = [0.0, 10.0];
        assert_eq!(energy(&f, &f, 1, &g, 1.0).unwrap(), 1.0);
        assert_eq!(energy(&[5.0, 5.0], &f, 1, &g, 1.0).unwrap(), 50.0);
        let p = minimize_l0(&f, 1, &g, &SolverConfig::with_lambda(1.0)).unwrap();
        assert_eq!(p.component_count(), 2);
    }

    #[test]
    fn energy_shape_mismatch() {
        let g = path(3);
        assert!(energy(&[0.0; 2], &[0.0; 3], 1, &g, 1.0).is_err());
        assert!(energy(&[0.0; 3], &[0.0; 4], 1, &g, 1.0).is_err());
    }

    #[test]
    fn identity_signal_energy_is_level_set_cut() {
        let g = path(5);
        let f = [1.0, 1.0, 2.0, 2.0, 7.0];
        assert_eq!(energy(&f, &f, 1, &g, 3.0).unwrap(), 6.0);
    }

    #[test]
    fn zero_lambda_gives_plateaus() {
        let g = path(9);
        let f = [1.0, 1.0, 1.0, 4.0, 4.0, 4.0, 2.0, 2.0, 2.0];
        let p = minimize_l0(&f, 1, &g, &SolverConfig::with_lambda(0.0)).unwrap();
        assert_eq!(p.super_index(), &[0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn huge_lambda_one_component_per_connected_part() {
        // two disconnected paths
        let g = WeightedGraph::unit_from_pairs(6, [(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        let f = [0.0, 5.0, 1.0, 9.0, 3.0, 3.0];
        let spread: f64 = 1e4;
        let p = minimize_l0(&f, 1, &g, &SolverConfig::with_lambda(spread)).unwrap();
        assert_eq!(p.super_index(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(p.value(0), &[2.0]);
        assert_eq!(p.value(1), &[5.0]);
    }

    #[test]
    fn plateaus_recovered_at_moderate_lambda() {
        let n = 60;
        let g = path(n);
        let f: Vec<f64> = (0..n).map(|i| [0.0, 5.0, 2.0][i / 20]).collect();
        let p = minimize_l0(&f, 1, &g, &SolverConfig::with_lambda(1.0)).unwrap();
        assert_eq!(p.component_count(), 3);
    }

    #[test]
    fn deterministic_and_parallel_independent() {
        let mut rng = crate::util::rng(3);
        let n = 400;
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), 0.0]).collect();
        let g = crate::neighborhood::build_knn_graph(&pts, 6).unwrap();
        let f: Vec<f64> = pts.iter().flat_map(|p| [(p[0] * 3.0).floor(), rng.gen::<f64>() * 0.3]).collect();
        let mut cfg = SolverConfig::with_lambda(0.05);
        let a = minimize_l0(&f, 2, &g, &cfg).unwrap();
        let b = minimize_l0(&f, 2, &g, &cfg).unwrap();
        cfg.parallel = false;
        let c = minimize_l0(&f, 2, &g, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.super_index(), c.super_index());
    }

    #[test]
    fn energy_trace_non_increasing() {
        let mut rng = crate::util::rng(9);
        let n = 300;
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let g = crate::neighborhood::build_knn_graph(&pts, 8).unwrap();
        let f: Vec<f64> = pts.iter().map(|p| p[0] + p[1] * p[1] + rng.gen::<f64>() * 0.1).collect();
        let (_, trace) = minimize_l0_traced(&f, 1, None, &g, &SolverConfig::with_lambda(0.02)).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{trace:?}");
        }
    }

    #[test]
    fn invalid_config() {
        let g = path(3);
        assert!(minimize_l0(&[0.0; 3], 1, &g, &SolverConfig::with_lambda(-1.0)).is_err());
        let cfg = SolverConfig { max_outer_iters: 0, ..Default::default() };
        assert!(minimize_l0(&[0.0; 3], 1, &g, &cfg).is_err());
    }
}
