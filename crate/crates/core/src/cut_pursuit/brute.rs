use super::{partition_energy, Partition};
use crate::error::{arg_err, Result};
use crate::neighborhood::WeightedGraph;

/// Largest graph the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 12;

/// Global minimizer of the ℓ0 energy by exhaustive search.
///
/// Every set partition of the nodes into connected blocks is visited (in
/// lexicographic order of its canonical labeling); each block takes the mean
/// of its members. Ties keep the lexicographically smallest labeling.
pub fn brute_force_partition(
    f: &[f64],
    dim: usize,
    graph: &WeightedGraph,
    lambda: f64,
) -> Result<Partition> {
    brute_force_partition_weighted(f, dim, None, graph, lambda)
}

pub fn brute_force_partition_weighted(
    f: &[f64],
    dim: usize,
    weights: Option<&[f64]>,
    graph: &WeightedGraph,
    lambda: f64,
) -> Result<Partition> {
    let n = graph.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return arg_err(format!("brute force limited to {BRUTE_FORCE_MAX_NODES} nodes, got {n}"));
    }
    if f.len() != n * dim {
        return arg_err("signal shape does not match graph");
    }
    if n == 0 {
        return Ok(Partition::from_labels(&[], f, dim, weights));
    }
    let adj = graph.adjacency();
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Partition)> = None;
    let mut stack_buf = Vec::new();
    loop {
        if blocks_connected(&labels, &adj, &mut stack_buf) {
            let p = Partition::from_labels(&labels, f, dim, weights);
            let e = partition_energy(&p, f, graph, lambda, weights);
            if best.as_ref().is_none_or(|(be, _)| e < *be) {
                best = Some((e, p));
            }
        }
        if !next_rgs(&mut labels) {
            break;
        }
    }
    Ok(best.unwrap().1)
}

/// Advances a restricted growth string to its lexicographic successor.
fn next_rgs(a: &mut [usize]) -> bool {
    let n = a.len();
    for i in (1..n).rev() {
        let max_prefix = a[..i].iter().copied().max().unwrap();
        if a[i] <= max_prefix {
            a[i] += 1;
            for x in a[i + 1..].iter_mut() {
                *x = 0;
            }
            return true;
        }
    }
    false
}

fn blocks_connected(labels: &[usize], adj: &crate::neighborhood::Adjacency, stack: &mut Vec<usize>) -> bool {
    let n = labels.len();
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; n];
    let mut reached = 0;
    for b in 0..blocks {
        let start = labels.iter().position(|&l| l == b).unwrap();
        seen[start] = true;
        stack.clear();
        stack.push(start);
        while let Some(v) = stack.pop() {
            reached += 1;
            for (u, _) in adj.of(v) {
                if !seen[u] && labels[u] == b {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    reached == n
}
