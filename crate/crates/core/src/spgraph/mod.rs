//! Superpoint adjacency graphs and their 18 handcrafted edge features.

use rayon::prelude::*;

use crate::error::{arg_err, Result};
use crate::features::{pca_of_points, LocalPca};
use crate::hierarchy::HierarchicalPartition;
use crate::neighborhood::KdTree;
use crate::util::{dist2, dot, mean_point, norm, sub};
use crate::Vec3;

pub const ADJACENCY_DIM: usize = 18;

/// Names of the adjacency feature columns, in storage order.
pub const ADJACENCY_NAMES: [&str; ADJACENCY_DIM] = [
    "offset_x",
    "offset_y",
    "offset_z",
    "offset_length",
    "offset_std_x",
    "offset_std_y",
    "offset_std_z",
    "length_ratio",
    "surface_ratio",
    "volume_ratio",
    "count_ratio",
    "normal_cos",
    "normal_p_offset_cos",
    "normal_q_offset_cos",
    "centroid_distance",
    "centroid_dir_x",
    "centroid_dir_y",
    "centroid_dir_z",
];

const RATIO_FLOOR: f64 = 1e-6;

/// Oriented adjacency between the components of one hierarchy level.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointGraph {
    pub level: usize,
    /// Both orientations of every adjacency, sorted.
    pub edges: Vec<(usize, usize)>,
    pub features: Vec<[f64; ADJACENCY_DIM]>,
    pub gaps: Vec<f64>,
}

impl SuperpointGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Outgoing edge ids grouped by source, as CSR offsets into `edges`.
    pub fn source_offsets(&self, node_count: usize) -> Vec<usize> {
        let mut off = vec![0usize; node_count + 1];
        for &(p, _) in &self.edges {
            off[p + 1] += 1;
        }
        for i in 0..node_count {
            off[i + 1] += off[i];
        }
        off
    }

    /// Renames superpoints (`c` becomes `perm[c]`) and re-sorts the edges.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.edges.iter().map(|&(p, q)| p.max(q) + 1).max().unwrap_or(0).max(perm.len());
        crate::hierarchy::check_permutation(perm, n)?;
        let mut idx: Vec<usize> = (0..self.edge_count()).collect();
        let renamed: Vec<(usize, usize)> = self.edges.iter().map(|&(p, q)| (perm[p], perm[q])).collect();
        idx.sort_by_key(|&e| renamed[e]);
        Ok(SuperpointGraph {
            level: self.level,
            edges: idx.iter().map(|&e| renamed[e]).collect(),
            features: idx.iter().map(|&e| self.features[e]).collect(),
            gaps: idx.iter().map(|&e| self.gaps[e]).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpGraphConfig {
    /// Gap threshold at level 1; doubled at each level above.
    pub epsilon: f64,
    pub num_steps: usize,
    pub k_interface: usize,
    /// Added to the gap to form the interface selection window.
    pub window_margin: f64,
}

impl SpGraphConfig {
    pub fn for_voxel(voxel: f64) -> Self {
        SpGraphConfig { epsilon: 3.0 * voxel, num_steps: 3, k_interface: 32, window_margin: 2.0 * voxel }
    }

    pub fn epsilon_at(&self, level: usize) -> f64 {
        self.epsilon * 2f64.powi(level.saturating_sub(1) as i32)
    }
}

impl Default for SpGraphConfig {
    fn default() -> Self {
        SpGraphConfig::for_voxel(0.03)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub distance: f64,
    pub anchor_p: Vec3,
    pub anchor_q: Vec3,
}

const TREE_THRESHOLD: usize = 64;

/// Member points of one superpoint, with a search tree when large.
#[derive(Debug, Clone)]
pub struct MemberSet {
    pub points: Vec<Vec3>,
    pub centroid: Vec3,
    tree: Option<KdTree>,
}

impl MemberSet {
    pub fn new(points: Vec<Vec3>) -> Self {
        let tree = (points.len() > TREE_THRESHOLD).then(|| KdTree::new(&points));
        MemberSet { centroid: mean_point(&points), points, tree }
    }

    fn without_tree(points: &[Vec3]) -> Self {
        MemberSet { centroid: mean_point(points), points: points.to_vec(), tree: None }
    }

    /// Closest member, the lowest index among equidistant ones.
    fn nearest(&self, to: &Vec3) -> Vec3 {
        if let Some(t) = &self.tree {
            return self.points[t.knn(to, 1, None)[0].0 as usize];
        }
        let mut best = self.points[0];
        let mut bd = dist2(&best, to);
        for p in &self.points[1..] {
            let d = dist2(p, to);
            if d < bd {
                bd = d;
                best = *p;
            }
        }
        best
    }

    /// Up to `k` members within `window` of `anchor`, nearest first; the
    /// single nearest member if none is.
    fn closest_within(&self, anchor: &Vec3, window: f64, k: usize) -> Vec<Vec3> {
        let w2 = window * window;
        let mut cand: Vec<(f64, usize)> = match &self.tree {
            Some(t) => t.within(anchor, window).into_iter().map(|i| (dist2(&self.points[i], anchor), i)).collect(),
            None => self.points.iter().enumerate().map(|(i, p)| (dist2(p, anchor), i)).collect(),
        };
        cand.retain(|(d, _)| *d <= w2);
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k.max(1));
        if cand.is_empty() {
            return vec![self.nearest(anchor)];
        }
        cand.into_iter().map(|(_, i)| self.points[i]).collect()
    }
}

/// Alternating nearest-point iteration from the two centroids.
///
/// The result is an upper bound on the minimum pair distance.
pub fn approximate_gap(points_p: &[Vec3], points_q: &[Vec3], num_steps: usize) -> Result<Gap> {
    if points_p.is_empty() || points_q.is_empty() {
        return arg_err("approximate_gap needs two nonempty point sets");
    }
    if num_steps == 0 {
        return arg_err("num_steps must be at least 1");
    }
    Ok(set_gap(&MemberSet::without_tree(points_p), &MemberSet::without_tree(points_q), num_steps))
}

fn set_gap(p: &MemberSet, q: &MemberSet, num_steps: usize) -> Gap {
    let mut c1 = p.centroid;
    let mut c2 = q.centroid;
    let mut prev = f64::INFINITY;
    for _ in 0..num_steps {
        c2 = q.nearest(&c1);
        c1 = p.nearest(&c2);
        let d = dist2(&c1, &c2);
        debug_assert!(d <= prev, "gap iteration increased the distance");
        prev = d;
    }
    Gap { distance: prev.sqrt(), anchor_p: c1, anchor_q: c2 }
}

/// Geometry of one superpoint computed from its member points.
///
/// Moments are taken relative to the first member so that shifting the
/// whole scene by a representable offset leaves them bit-identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpointStats {
    pub centroid: Vec3,
    pub reference: Vec3,
    /// Centroid minus `reference`.
    pub local_centroid: Vec3,
    pub pca: LocalPca,
    pub point_count: usize,
}

impl SuperpointStats {
    pub fn of(points: &[Vec3]) -> Self {
        let reference = points.first().copied().unwrap_or([0.0; 3]);
        let local: Vec<Vec3> = points.iter().map(|p| sub(p, &reference)).collect();
        let local_centroid = mean_point(&local);
        SuperpointStats {
            centroid: [0, 1, 2].map(|d| reference[d] + local_centroid[d]),
            reference,
            local_centroid,
            pca: pca_of_points(local.iter()),
            point_count: points.len(),
        }
    }

    /// `q.centroid − p.centroid`, computed without absolute coordinates.
    pub fn offset_to(&self, q: &SuperpointStats) -> Vec3 {
        [0, 1, 2].map(|d| (q.reference[d] - self.reference[d]) + (q.local_centroid[d] - self.local_centroid[d]))
    }
}

/// Interface offsets between the facing parts of two superpoints:
/// `[mean offset (3), mean offset length, per-axis offset std (3)]`.
pub fn interface_features(
    points_p: &[Vec3],
    points_q: &[Vec3],
    gap: &Gap,
    window: f64,
    k_interface: usize,
) -> [f64; 7] {
    let (p, q) = (MemberSet::without_tree(points_p), MemberSet::without_tree(points_q));
    set_interface(&p, &q, gap, window, k_interface)
}

fn lex(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2]))
}

/// Principal axis of the union of both selections. It only depends on the
/// unordered pair, and its sign follows the third moment along it.
fn interface_axis(sel_p: &[Vec3], sel_q: &[Vec3], origin: &Vec3) -> Vec3 {
    let mut all: Vec<Vec3> = sel_p.iter().chain(sel_q).map(|v| sub(v, origin)).collect();
    all.sort_by(lex);
    let axis = pca_of_points(all.iter()).eigenvectors[0];
    let mean = mean_point(&all);
    let skew: f64 = all.iter().map(|v| dot(&sub(v, &mean), &axis).powi(3)).sum();
    if skew < 0.0 {
        axis.map(|a| -a)
    } else {
        axis
    }
}

fn set_interface(p: &MemberSet, q: &MemberSet, gap: &Gap, window: f64, k_interface: usize) -> [f64; 7] {
    let mut sel_p = p.closest_within(&gap.anchor_q, window, k_interface);
    let mut sel_q = q.closest_within(&gap.anchor_p, window, k_interface);
    let origin = if lex(&gap.anchor_p, &gap.anchor_q).is_le() { gap.anchor_p } else { gap.anchor_q };
    let axis = interface_axis(&sel_p, &sel_q, &origin);
    let key = |v: &Vec3| dot(&sub(v, &origin), &axis);
    sel_p.sort_by(|a, b| key(a).total_cmp(&key(b)).then(lex(a, b)));
    sel_q.sort_by(|a, b| key(a).total_cmp(&key(b)).then(lex(a, b)));

    let m = sel_p.len().max(sel_q.len());
    let offsets: Vec<Vec3> =
        (0..m).map(|i| sub(&sel_q[i * sel_q.len() / m], &sel_p[i * sel_p.len() / m])).collect();
    let inv = 1.0 / m as f64;
    let mean = mean_point(&offsets);
    let length = offsets.iter().map(norm).sum::<f64>() * inv;
    let mut var = [0.0; 3];
    for o in &offsets {
        for d in 0..3 {
            var[d] += (o[d] - mean[d]).powi(2);
        }
    }
    let std = var.map(|v| (v * inv).sqrt());
    [mean[0], mean[1], mean[2], length, std[0], std[1], std[2]]
}

/// `[length, surface, volume, point count]` ratios of `p` over `q`.
pub fn ratio_features(p: &SuperpointStats, q: &SuperpointStats) -> [f64; 4] {
    let size = |s: &SuperpointStats| {
        let [s1, s2, s3] = s.pca.sigmas();
        [s1, s1 * s2, s1 * s2 * s3, s.point_count as f64]
    };
    let (a, b) = (size(p), size(q));
    [0, 1, 2, 3].map(|i| a[i].max(RATIO_FLOOR) / b[i].max(RATIO_FLOOR))
}

fn abs_cos(a: &Vec3, b: &Vec3) -> f64 {
    let n = norm(a) * norm(b);
    if n == 0.0 {
        0.0
    } else {
        (dot(a, b) / n).abs().min(1.0)
    }
}

/// Relative pose: normal/normal and normal/offset cosines, centroid distance
/// and unit centroid offset.
pub fn pose_features(p: &SuperpointStats, q: &SuperpointStats, mean_offset: &Vec3) -> [f64; 7] {
    let (np, nq) = (p.pca.normal(), q.pca.normal());
    let d = p.offset_to(q);
    let len = norm(&d);
    let unit = if len > 0.0 { d.map(|x| x / len) } else { [0.0; 3] };
    [
        abs_cos(&np, &nq),
        abs_cos(&np, mean_offset),
        abs_cos(&nq, mean_offset),
        len,
        unit[0],
        unit[1],
        unit[2],
    ]
}

/// Full 18-dimensional feature row of the oriented edge `p → q`.
pub fn edge_features(
    points_p: &MemberSet,
    points_q: &MemberSet,
    stats_p: &SuperpointStats,
    stats_q: &SuperpointStats,
    gap: &Gap,
    config: &SpGraphConfig,
) -> [f64; ADJACENCY_DIM] {
    let window = gap.distance + config.window_margin;
    let inter = set_interface(points_p, points_q, gap, window, config.k_interface);
    let ratio = ratio_features(stats_p, stats_q);
    let pose = pose_features(stats_p, stats_q, &[inter[0], inter[1], inter[2]]);
    let mut row = [0.0; ADJACENCY_DIM];
    row[..7].copy_from_slice(&inter);
    row[7..11].copy_from_slice(&ratio);
    row[11..].copy_from_slice(&pose);
    row
}

/// Member points of every level-`level` component.
pub fn member_points(hp: &HierarchicalPartition, level: usize, positions: &[Vec3]) -> Vec<MemberSet> {
    hp.point_members(level)
        .into_par_iter()
        .map(|m| MemberSet::new(m.into_iter().map(|p| positions[p]).collect()))
        .collect()
}

/// Unordered pairs `p < q` whose approximate gap is within `epsilon`.
///
/// Candidates are pruned by centroid distance `≤ r_p + r_q + epsilon`.
pub fn gap_pairs(
    hp: &HierarchicalPartition,
    level: usize,
    members: &[MemberSet],
    epsilon: f64,
    num_steps: usize,
) -> Result<Vec<(usize, usize, Gap)>> {
    if level == 0 || level > hp.level_count() {
        return arg_err(format!("level {level} outside 1..={}", hp.level_count()));
    }
    if !(epsilon > 0.0) {
        return arg_err("epsilon must be > 0");
    }
    if num_steps == 0 {
        return arg_err("num_steps must be at least 1");
    }
    let l = hp.level(level);
    let tree = KdTree::new(&l.centroids);
    // the larger superpoint of each pair finds the smaller one within 2·r + ε
    let larger = |p: usize, q: usize| (l.radii[q], q) < (l.radii[p], p);
    let out: Vec<Vec<(usize, usize, Gap)>> = (0..l.component_count())
        .into_par_iter()
        .map(|p| {
            let mut found = Vec::new();
            for q in tree.within(&l.centroids[p], 2.0 * l.radii[p] + epsilon) {
                if !larger(p, q) {
                    continue;
                }
                let bound = l.radii[p] + l.radii[q] + epsilon;
                if dist2(&l.centroids[p], &l.centroids[q]) > bound * bound {
                    continue;
                }
                let (a, b) = (p.min(q), p.max(q));
                let gap = set_gap(&members[a], &members[b], num_steps);
                if gap.distance <= epsilon {
                    found.push((a, b, gap));
                }
            }
            found
        })
        .collect();
    let mut pairs: Vec<_> = out.into_iter().flatten().collect();
    pairs.sort_by_key(|e| (e.0, e.1));
    Ok(pairs)
}

/// Builds the adjacency graph of level `level` with its edge features.
pub fn build_superpoint_graph(
    hp: &HierarchicalPartition,
    level: usize,
    positions: &[Vec3],
    config: &SpGraphConfig,
) -> Result<SuperpointGraph> {
    if positions.len() != hp.point_count() {
        return arg_err("positions do not match the hierarchy");
    }
    let members = member_points(hp, level, positions);
    let pairs = gap_pairs(hp, level, &members, config.epsilon_at(level), config.num_steps)?;
    let stats: Vec<SuperpointStats> = members.par_iter().map(|m| SuperpointStats::of(&m.points)).collect();

    let mut oriented: Vec<(usize, usize, Gap)> = Vec::with_capacity(2 * pairs.len());
    for (p, q, g) in pairs {
        oriented.push((p, q, g));
        oriented.push((q, p, Gap { distance: g.distance, anchor_p: g.anchor_q, anchor_q: g.anchor_p }));
    }
    oriented.sort_by_key(|e| (e.0, e.1));
    let features = oriented
        .par_iter()
        .map(|(p, q, g)| edge_features(&members[*p], &members[*q], &stats[*p], &stats[*q], g, config))
        .collect();
    Ok(SuperpointGraph {
        level,
        edges: oriented.iter().map(|e| (e.0, e.1)).collect(),
        gaps: oriented.iter().map(|e| e.2.distance).collect(),
        features,
    })
}
