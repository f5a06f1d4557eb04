mod common;

use proptest::prelude::*;
use superpart_core::cloud_io::PointCloud;
use superpart_core::eval::{confusion_and_miou, oracle_from_groups, purity_sweep, SweepMode};
use superpart_core::pipeline::PipelineConfig;
use superpart_core::synthetic::{room_scene, SceneConfig};

/// IoU per class by explicit set arithmetic over point indices.
fn set_iou(pred: &[i32], truth: &[i32], k: i32) -> Option<f64> {
    let labeled: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] >= 0).collect();
    let t: Vec<usize> = labeled.iter().copied().filter(|&i| truth[i] == k).collect();
    let p: Vec<usize> = labeled.iter().copied().filter(|&i| pred[i] == k).collect();
    let inter = t.iter().filter(|i| p.contains(i)).count();
    let union = t.len() + p.len() - inter;
    (union > 0).then(|| inter as f64 / union as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_set_arithmetic(pairs in proptest::collection::vec((-1i32..5, -1i32..5), 1..120)) {
        let pred: Vec<i32> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<i32> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(truth.iter().any(|&t| t >= 0));
        let m = confusion_and_miou(&pred, &truth, 5).unwrap();
        let ious: Vec<Option<f64>> = (0..5).map(|k| set_iou(&pred, &truth, k)).collect();
        prop_assert_eq!(&m.iou, &ious);
        let present: Vec<f64> = ious.iter().flatten().copied().collect();
        prop_assert!((m.miou - present.iter().sum::<f64>() / present.len() as f64).abs() <= 1e-12);
        let labeled = truth.iter().filter(|&&t| t >= 0).count();
        let hits = pred.iter().zip(&truth).filter(|(p, t)| **t >= 0 && p == t).count();
        prop_assert!((m.oa - hits as f64 / labeled as f64).abs() <= 1e-12);
        prop_assert_eq!(m.confusion.total() as usize, labeled);
    }

    #[test]
    fn majority_oracle_maximizes_accuracy(
        sizes in proptest::collection::vec(1usize..8, 1..=5),
        seed in 0u64..10_000,
    ) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let classes = 3;
        let mut groups = Vec::new();
        let mut labels = Vec::new();
        for s in sizes {
            groups.push((labels.len()..labels.len() + s).collect::<Vec<_>>());
            labels.extend((0..s).map(|_| rng.gen_range(0..classes as i32)));
        }
        let oracle = oracle_from_groups(&groups, &labels);
        let best = confusion_and_miou(&oracle.point_prediction, &labels, classes).unwrap().oa;
        // every assignment of one class per group
        let total = classes.pow(groups.len() as u32);
        for code in 0..total {
            let mut pred = vec![0; labels.len()];
            let mut c = code;
            for g in &groups {
                for &p in g {
                    pred[p] = (c % classes) as i32;
                }
                c /= classes;
            }
            let oa = confusion_and_miou(&pred, &labels, classes).unwrap().oa;
            prop_assert!(oa <= best + 1e-12);
        }
    }
}

#[test]
fn majority_oracle_is_not_miou_optimal() {
    // 10 × A and (3 × A, 2 × B): voting B on the second group raises mIoU
    let labels = [vec![0; 10], vec![0, 0, 0, 1, 1]].concat();
    let groups = vec![(0..10).collect::<Vec<_>>(), (10..15).collect()];
    let oracle = oracle_from_groups(&groups, &labels);
    let majority = confusion_and_miou(&oracle.point_prediction, &labels, 2).unwrap().miou;
    let alt: Vec<i32> = [vec![0; 10], vec![1; 5]].concat();
    assert!(confusion_and_miou(&alt, &labels, 2).unwrap().miou > majority);
}

#[test]
fn sweep_limits() {
    let cloud = room_scene(&SceneConfig::with_points(4_000, 11));
    let cfg = PipelineConfig { voxel: 0.0, ..Default::default() };
    let rows = purity_sweep(&cloud, &[1e-6], SweepMode::Voxel, &cfg).unwrap();
    assert_eq!(rows[0].component_count, cloud.len());
    assert_eq!(rows[0].oracle_miou, 1.0);

    let rows = purity_sweep(&cloud, &[1e9], SweepMode::Partition, &cfg).unwrap();
    let knn = superpart_core::neighborhood::build_knn_graph(&cloud.positions, cfg.k_adj).unwrap();
    assert_eq!(rows[0].component_count, knn.connected_components().1);

    // a voxel larger than the scene around the origin leaves one group per octant
    let octants: std::collections::BTreeSet<[bool; 3]> =
        cloud.positions.iter().map(|p| p.map(|c| c < 0.0)).collect();
    let rows = purity_sweep(&cloud, &[1e9], SweepMode::Voxel, &cfg).unwrap();
    assert_eq!(rows[0].component_count, octants.len());

    // a single group: only the majority class has a nonzero IoU
    let labels = cloud.labels.as_ref().unwrap();
    let oracle = oracle_from_groups(&[(0..cloud.len()).collect()], labels);
    let m = confusion_and_miou(&oracle.point_prediction, labels, 1 + *labels.iter().max().unwrap() as usize).unwrap();
    let hist = superpart_core::cloud_io::label_histogram(labels);
    let top = *hist.values().max().unwrap();
    assert!((m.miou - top as f64 / labels.len() as f64 / hist.len() as f64).abs() < 1e-12);

    let unlabeled = PointCloud { labels: None, ..cloud };
    assert!(purity_sweep(&unlabeled, &[0.1], SweepMode::Voxel, &cfg).is_err());
}
