mod common;

use std::collections::BTreeSet;

use rand::Rng;
use superpart_core::hierarchy::{HierarchicalPartition, Level};
use superpart_core::spgraph::{build_superpoint_graph, SpGraphConfig, ADJACENCY_DIM};
use superpart_core::Vec3;

/// Single-level hierarchy whose components are the given blobs.
fn blob_scene(blobs: &[Vec<Vec3>]) -> (HierarchicalPartition, Vec<Vec3>) {
    let positions: Vec<Vec3> = blobs.iter().flatten().copied().collect();
    let super_index: Vec<usize> = blobs.iter().enumerate().flat_map(|(i, b)| std::iter::repeat(i).take(b.len())).collect();
    let mut centroids = Vec::new();
    let mut radii = Vec::new();
    for b in blobs {
        let c: Vec3 = [0, 1, 2].map(|d| b.iter().map(|p| p[d]).sum::<f64>() / b.len() as f64);
        radii.push(b.iter().map(|p| common::dist(p, &c)).fold(0.0, f64::max));
        centroids.push(c);
    }
    let level = Level {
        super_index,
        centroids,
        mean_features: vec![],
        point_counts: blobs.iter().map(Vec::len).collect(),
        radii,
    };
    (HierarchicalPartition::from_levels(positions.len(), 0, vec![level]).unwrap(), positions)
}

#[test]
fn thirty_blob_scene_against_exhaustive_filter() {
    let mut rng = common::rng(30);
    let blobs: Vec<Vec<Vec3>> = (0..30)
        .map(|_| {
            let center = [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..1.0)];
            let axes = [rng.gen_range(0.1..0.4), rng.gen_range(0.05..0.3), rng.gen_range(0.02..0.1)];
            let n = rng.gen_range(5..120);
            common::ellipsoid_blob(&mut rng, n, axes, center)
        })
        .collect();
    let (hp, positions) = blob_scene(&blobs);
    let cfg = SpGraphConfig { epsilon: 0.15, ..SpGraphConfig::for_voxel(0.03) };
    let g = build_superpoint_graph(&hp, 1, &positions, &cfg).unwrap();

    let mut exact = BTreeSet::new();
    for a in 0..blobs.len() {
        for b in a + 1..blobs.len() {
            if common::min_pair_distance(&blobs[a], &blobs[b]) <= cfg.epsilon {
                exact.insert((a, b));
            }
        }
    }
    let found: BTreeSet<(usize, usize)> = g.edges.iter().filter(|(p, q)| p < q).copied().collect();
    // the gap is an upper bound, so every edge is a true adjacency
    assert!(found.is_subset(&exact));
    let missed = exact.difference(&found).count();
    println!("{} exact adjacencies, {} found, {missed} missed by the gap heuristic", exact.len(), found.len());
    assert!(missed * 5 <= exact.len(), "too many adjacencies missed: {missed}");

    for (e, &(p, q)) in g.edges.iter().enumerate() {
        assert_ne!(p, q);
        assert!(g.edges.binary_search(&(q, p)).is_ok());
        assert!(g.gaps[e] <= cfg.epsilon);
        let f = &g.features[e];
        assert_eq!(f.len(), ADJACENCY_DIM);
        assert!(f.iter().all(|v| v.is_finite()));
        assert!((7..11).all(|i| f[i] > 0.0));
        assert!((11..14).all(|i| (-1.0..=1.0).contains(&f[i])));
    }
}

#[test]
fn touching_and_separated_pairs() {
    let a: Vec<Vec3> = (0..10).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
    let b: Vec<Vec3> = (0..10).map(|i| [0.9 + i as f64 * 0.1, 0.05 * i as f64, 0.0]).collect();
    let far: Vec<Vec3> = (0..10).map(|i| [10.0 + i as f64 * 0.1, 0.0, 0.0]).collect();
    let (hp, positions) = blob_scene(&[a, b, far]);
    let cfg = SpGraphConfig { epsilon: 0.5, ..Default::default() };
    let g = build_superpoint_graph(&hp, 1, &positions, &cfg).unwrap();
    assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
    assert_eq!(g.gaps, vec![0.0, 0.0]);
    // centroid offset of the pair in both orientations
    assert_eq!(g.features[0][14], g.features[1][14]);
}
