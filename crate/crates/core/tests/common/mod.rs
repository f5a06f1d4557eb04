//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superpart_core::hierarchy::{HierarchicalPartition, Level};
use superpart_core::kernel::diagnostics::AttentionInstance;
use superpart_core::{DenseMatrix, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dist(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn min_pair_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            best = best.min(dist(p, q));
        }
    }
    best
}

/// ℓ0 energy of a labeling where every block takes its mean value.
pub fn labeling_energy(f: &[f64], dim: usize, edges: &[(usize, usize, f64)], labels: &[usize], lambda: f64) -> f64 {
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut sum = vec![0.0; blocks * dim];
    let mut cnt = vec![0.0; blocks];
    for (v, &b) in labels.iter().enumerate() {
        cnt[b] += 1.0;
        for d in 0..dim {
            sum[b * dim + d] += f[v * dim + d];
        }
    }
    let mut e = 0.0;
    for (v, &b) in labels.iter().enumerate() {
        for d in 0..dim {
            let mean = sum[b * dim + d] / cnt[b];
            e += (f[v * dim + d] - mean).powi(2);
        }
    }
    for &(u, v, w) in edges {
        if labels[u] != labels[v] {
            e += lambda * w;
        }
    }
    e
}

fn blocks_connected(labels: &[usize], edges: &[(usize, usize, f64)]) -> bool {
    let n = labels.len();
    // union-find restricted to intra-block edges
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(u, v, _) in edges {
        if labels[u] == labels[v] {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            parent[a] = b;
        }
    }
    let mut root_of_block = std::collections::HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        if *root_of_block.entry(labels[v]).or_insert(r) != r {
            return false;
        }
    }
    true
}

/// Minimum ℓ0 energy over all partitions into connected blocks, by
/// recursive enumeration of set partitions.
pub fn brute_force_energy(f: &[f64], dim: usize, n: usize, edges: &[(usize, usize, f64)], lambda: f64) -> f64 {
    fn rec(
        i: usize,
        blocks: usize,
        labels: &mut Vec<usize>,
        f: &[f64],
        dim: usize,
        edges: &[(usize, usize, f64)],
        lambda: f64,
        best: &mut f64,
    ) {
        if i == labels.len() {
            if blocks_connected(labels, edges) {
                *best = best.min(labeling_energy(f, dim, edges, labels, lambda));
            }
            return;
        }
        for b in 0..=blocks {
            labels[i] = b;
            rec(i + 1, blocks.max(b + 1), labels, f, dim, edges, lambda, best);
        }
    }
    let mut best = f64::INFINITY;
    rec(0, 0, &mut vec![0; n], f, dim, edges, lambda, &mut best);
    best
}

/// Attention output from explicit per-node neighbor scans.
pub fn attention_oracle(inst: &AttentionInstance) -> DenseMatrix {
    let s = inst.k.rows();
    let sh = inst.shape;
    let mut out = DenseMatrix::zeros(s, sh.heads * sh.d_val);
    for p in 0..s {
        let inc: Vec<usize> = inst.edges.iter().enumerate().filter(|(_, e)| e.0 == p).map(|(i, _)| i).collect();
        if inc.is_empty() {
            continue;
        }
        let scale = (inc.len() as f64).sqrt();
        for h in 0..sh.heads {
            let logits: Vec<f64> = inc
                .iter()
                .map(|&e| {
                    let q = inst.edges[e].1;
                    (0..sh.d_key)
                        .map(|j| {
                            let d = h * sh.d_key + j;
                            (inst.q.get(p, d) + inst.a_que.get(e, d)) * (inst.k.get(q, d) + inst.a_key.get(e, d))
                        })
                        .sum::<f64>()
                        / scale
                })
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = ex.iter().sum();
            for j in 0..sh.d_val {
                let d = h * sh.d_val + j;
                let mut acc = 0.0;
                for (i, &e) in inc.iter().enumerate() {
                    let q = inst.edges[e].1;
                    acc += ex[i] / z * (inst.v.get(q, d) + inst.a_val.get(e, d));
                }
                out.set(p, d, acc);
            }
        }
    }
    out
}

/// Random hierarchy over `n` points with the given level sizes; per-level
/// arrays other than the parent maps are filled with placeholders.
pub fn random_hierarchy(rng: &mut ChaCha8Rng, n: usize, sizes: &[usize]) -> HierarchicalPartition {
    let mut prev = n;
    let mut levels = Vec::new();
    for &s in sizes {
        assert!(s <= prev);
        let mut idx: Vec<usize> = (0..prev).map(|e| if e < s { e } else { rng.gen_range(0..s) }).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.gen_range(0..=i));
        }
        levels.push(Level {
            super_index: idx,
            centroids: vec![[0.0; 3]; s],
            mean_features: vec![],
            point_counts: vec![0; s],
            radii: vec![0.0; s],
        });
        prev = s;
    }
    let mut hp = HierarchicalPartition::from_levels(n, 0, levels).unwrap();
    let counts: Vec<Vec<usize>> = (1..=sizes.len()).map(|i| hp.point_members(i).iter().map(Vec::len).collect()).collect();
    hp = HierarchicalPartition::from_levels(
        n,
        0,
        hp.levels()
            .iter()
            .zip(counts)
            .map(|(l, c)| Level { point_counts: c, ..l.clone() })
            .collect(),
    )
    .unwrap();
    hp
}

/// Hierarchical cross-entropy computed point by point.
pub fn loss_oracle(logits: &[DenseMatrix], hp: &HierarchicalPartition, labels: &[i32], mu: &[f64]) -> f64 {
    let classes = logits[0].cols();
    let labeled = labels.iter().filter(|&&l| l >= 0).count() as f64;
    let mut total = 0.0;
    for i in 1..=hp.level_count() {
        let map = hp.point_to_level(i);
        let weight = if i == 1 { 1.0 } else { mu[i - 2] };
        for c in 0..hp.size(i) {
            let mut hist = vec![0.0; classes];
            for (p, &m) in map.iter().enumerate() {
                if m == c && labels[p] >= 0 {
                    hist[labels[p] as usize] += 1.0;
                }
            }
            let n: f64 = hist.iter().sum();
            if n == 0.0 {
                continue;
            }
            let row = logits[i - 1].row(c);
            let lse = row.iter().map(|z| z.exp()).sum::<f64>().ln();
            let logp = |k: usize| (row[k] - lse).max(1e-12f64.ln());
            let ce = if i == 1 {
                let mut best = 0;
                for k in 1..classes {
                    if hist[k] > hist[best] {
                        best = k;
                    }
                }
                -logp(best)
            } else {
                -(0..classes).map(|k| hist[k] / n * logp(k)).sum::<f64>()
            };
            total += weight * n / labeled * ce;
        }
    }
    total
}

/// Symmetric 3×3 eigenvalues (descending) from the characteristic
/// polynomial via the trigonometric cubic solution.
pub fn cubic_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut e = [a[0][0], a[1][1], a[2][2]];
        e.sort_by(|x, y| y.total_cmp(x));
        return e;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: Vec<Vec<f64>> =
        (0..3).map(|i| (0..3).map(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p).collect()).collect();
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Points uniformly inside an ellipsoid with semi-axes `axes`, rotated by
/// a random orthonormal frame and centered at `center`.
pub fn ellipsoid_blob(rng: &mut ChaCha8Rng, n: usize, axes: Vec3, center: Vec3) -> Vec<Vec3> {
    let frame = random_rotation(rng);
    (0..n)
        .map(|_| {
            let u = loop {
                let v: Vec3 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    break v;
                }
            };
            let local = [u[0] * axes[0], u[1] * axes[1], u[2] * axes[2]];
            let r = rotate(&frame, &local);
            [r[0] + center[0], r[1] + center[1], r[2] + center[2]]
        })
        .collect()
}

/// Uniformly random rotation from a normalized quaternion.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q = loop {
        let q: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = q.iter().map(|x| x * x).sum::<f64>();
        if n > 1e-3 && n <= 1.0 {
            let s = n.sqrt();
            break q.map(|x| x / s);
        }
    };
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn rotate(r: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}
