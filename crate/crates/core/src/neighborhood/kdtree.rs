use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::util::dist2;
use crate::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { dim: u8, value: f64, left: u32, right: u32 },
}

/// Exact kd-tree over 3D points.
///
/// Neighbors are ordered by `(squared distance, index)`, so equal distances
/// resolve to the smaller point index.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn new(positions: &[Vec3]) -> Self {
        assert!(positions.len() < u32::MAX as usize, "too many points for kd-tree");
        let mut ids: Vec<u32> = (0..positions.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * positions.len() / LEAF_SIZE + 1);
        if !positions.is_empty() {
            build(positions, &mut ids, 0, &mut nodes);
        }
        let points = ids.iter().map(|&i| positions[i as usize]).collect();
        KdTree { points, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, nearest first. `exclude` removes
    /// one point index from consideration (the query point itself).
    pub fn knn(&self, query: &Vec3, k: usize, exclude: Option<u32>) -> Vec<(u32, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.knn_rec(0, query, k, exclude, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter().map(|c| (c.id, c.d2)).collect()
    }

    fn knn_rec(
        &self,
        node: usize,
        q: &Vec3,
        k: usize,
        exclude: Option<u32>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let id = self.ids[slot];
                    if Some(id) == exclude {
                        continue;
                    }
                    let c = Candidate { d2: dist2(q, &self.points[slot]), id };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near as usize, q, k, exclude, heap);
                // ties on the plane must still be visited for the index tie-break
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.knn_rec(far as usize, q, k, exclude, heap);
                }
            }
        }
    }

    /// Indices of all points within `radius` of `query` (inclusive), ascending.
    pub fn within(&self, query: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.within_rec(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    if dist2(q, &self.points[slot]) <= r2 {
                        out.push(self.ids[slot] as usize);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_rec(near as usize, q, r2, out);
                if diff * diff <= r2 {
                    self.within_rec(far as usize, q, r2, out);
                }
            }
        }
    }
}

fn build(positions: &[Vec3], ids: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let me = nodes.len() as u32;
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + ids.len()) as u32 });
        return me;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in ids.iter() {
        let p = &positions[i as usize];
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let dim = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[dim] - lo[dim] <= 0.0 {
        // all points coincide
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + ids.len()) as u32 });
        return me;
    }
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        positions[a as usize][dim].total_cmp(&positions[b as usize][dim])
    });
    let value = positions[ids[mid] as usize][dim];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = ids.split_at_mut(mid);
    let left = build(positions, l, offset, nodes);
    let right = build(positions, r, offset + mid, nodes);
    nodes[me as usize] = Node::Split { dim: dim as u8, value, left, right };
    me
}
