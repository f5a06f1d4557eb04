use std::collections::HashMap;

use super::PointCloud;
use crate::error::{arg_err, Result};
use crate::util::majority_label;

/// Which original points each subsampled point stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelGrouping {
    /// `groups[m]` lists the original indices (ascending) merged into output point `m`.
    pub groups: Vec<Vec<usize>>,
}

impl VoxelGrouping {
    pub fn point_to_group(&self, n: usize) -> Vec<usize> {
        let mut map = vec![usize::MAX; n];
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                map[i] = g;
            }
        }
        map
    }
}

fn voxel_key(p: &[f64; 3], size: f64) -> [i64; 3] {
    p.map(|c| (c / size).floor() as i64)
}

/// One point per occupied voxel of a grid anchored at the origin.
///
/// Output points are sorted by voxel key. Positions and radiometry are the
/// member means; the label is the most frequent member label (ties to the
/// smallest class id, `-1` if no member is labeled).
pub fn voxel_subsample(cloud: &PointCloud, voxel_size: f64) -> Result<(PointCloud, VoxelGrouping)> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return arg_err(format!("voxel size must be positive, got {voxel_size}"));
    }
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in cloud.positions.iter().enumerate() {
        cells.entry(voxel_key(p, voxel_size)).or_default().push(i);
    }
    let mut cells: Vec<([i64; 3], Vec<usize>)> = cells.into_iter().collect();
    cells.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let r = cloud.radiometry_dim;
    let mut out = PointCloud {
        positions: Vec::with_capacity(cells.len()),
        radiometry: Vec::with_capacity(cells.len() * r),
        radiometry_dim: r,
        labels: cloud.labels.as_ref().map(|_| Vec::with_capacity(cells.len())),
    };
    let mut groups = Vec::with_capacity(cells.len());
    for (_, mut members) in cells {
        members.sort_unstable();
        let inv = 1.0 / members.len() as f64;
        let mut c = [0.0; 3];
        let mut rad = vec![0.0; r];
        for &i in &members {
            for d in 0..3 {
                c[d] += cloud.positions[i][d];
            }
            for (acc, v) in rad.iter_mut().zip(cloud.radiometry_row(i)) {
                *acc += v;
            }
        }
        out.positions.push(c.map(|v| v * inv));
        out.radiometry.extend(rad.iter().map(|v| (v * inv).clamp(0.0, 1.0)));
        if let (Some(dst), Some(src)) = (out.labels.as_mut(), cloud.labels.as_ref()) {
            dst.push(majority_label(members.iter().map(|&i| src[i])).unwrap_or(-1));
        }
        groups.push(members);
    }
    Ok((out, VoxelGrouping { groups }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn two_points_one_voxel() {
        let c = PointCloud::from_positions(vec![[0.0; 3], [0.01, 0.0, 0.0]]);
        let (s, g) = voxel_subsample(&c, 0.1).unwrap();
        assert_eq!(s.positions, vec![[0.005, 0.0, 0.0]]);
        assert_eq!(g.groups, vec![vec![0, 1]]);
    }

    #[test]
    fn sparse_points_unchanged() {
        let pts = vec![[0.55, 0.0, 0.0], [0.05, 0.05, 0.05], [0.05, 3.05, 0.05]];
        let (s, g) = voxel_subsample(&PointCloud::from_positions(pts.clone()), 0.1).unwrap();
        assert_eq!(s.len(), 3);
        let mut a = s.positions.clone();
        let mut b = pts;
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
        assert!(g.groups.iter().all(|m| m.len() == 1));
    }

    #[test]
    fn invalid_size() {
        assert!(voxel_subsample(&PointCloud::default(), 0.0).is_err());
        assert!(voxel_subsample(&PointCloud::default(), -1.0).is_err());
    }

    #[test]
    fn majority_label_with_tie_break() {
        let c = PointCloud {
            positions: vec![[0.0; 3], [0.01; 3], [0.02; 3], [0.03; 3]],
            labels: Some(vec![4, 2, 4, 2]),
            ..Default::default()
        };
        let (s, _) = voxel_subsample(&c, 1.0).unwrap();
        assert_eq!(s.labels, Some(vec![2]));
    }

    #[test]
    fn matches_hash_grid_oracle() {
        let mut rng = crate::util::rng(42);
        let pts: Vec<[f64; 3]> =
            (0..10_000).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.5)]).collect();
        let cloud = PointCloud::from_positions(pts.clone());
        let (s, g) = voxel_subsample(&cloud, 0.05).unwrap();

        // oracle: group by string key of integer cell coordinates
        let mut oracle: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
        for (i, p) in pts.iter().enumerate() {
            let k = format!("{} {} {}", (p[0] / 0.05).floor(), (p[1] / 0.05).floor(), (p[2] / 0.05).floor());
            oracle.entry(k).or_default().push(i);
        }
        let mut expect: Vec<Vec<usize>> = oracle.into_values().collect();
        expect.sort();
        let mut got = g.groups.clone();
        got.sort();
        assert_eq!(got, expect);
        for (m, members) in g.groups.iter().enumerate() {
            for d in 0..3 {
                let mean = members.iter().map(|&i| pts[i][d]).sum::<f64>() / members.len() as f64;
                assert!((mean - s.positions[m][d]).abs() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn partition_and_order_invariance(seed in 0u64..5000, n in 1usize..300) {
                let mut rng = crate::util::rng(seed);
                let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
                let (s, g) = voxel_subsample(&PointCloud::from_positions(pts.clone()), 0.2).unwrap();
                prop_assert!(s.len() <= n);
                let mut seen = vec![0usize; n];
                for m in &g.groups { for &i in m { seen[i] += 1; } }
                prop_assert!(seen.iter().all(|&c| c == 1));

                let rev: Vec<_> = pts.iter().rev().copied().collect();
                let (s2, _) = voxel_subsample(&PointCloud::from_positions(rev), 0.2).unwrap();
                prop_assert_eq!(s.len(), s2.len());
                for (a, b) in s.positions.iter().zip(&s2.positions) {
                    for d in 0..3 { prop_assert!((a[d] - b[d]).abs() < 1e-12); }
                }
            }
        }
    }
}
