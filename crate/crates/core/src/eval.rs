//! Segmentation metrics, the majority-label oracle and purity sweeps.

use std::io::Write;

use rayon::prelude::*;

use crate::cloud_io::{voxel_subsample, PointCloud};
use crate::cut_pursuit::{minimize_l0, SolverConfig};
use crate::error::{arg_err, Error, Result};
use crate::features::assemble_with_neighbors;
use crate::hierarchy::HierarchicalPartition;
use crate::neighborhood::{knn_graph_from_table, knn_indices};
use crate::pipeline::{partition_signal, PipelineConfig};
use crate::util::majority_label;

/// Row = ground truth, column = prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Per ground-truth class, labeled points whose prediction is missing or
    /// out of range. They count as false negatives.
    pub unassigned: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.unassigned.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    /// `None` for classes absent from both truth and prediction.
    pub iou: Vec<Option<f64>>,
    pub miou: f64,
    pub oa: f64,
}

/// Confusion matrix, per-class IoU, mIoU and overall accuracy over the
/// points whose truth is a class id (`≥ 0`).
pub fn confusion_and_miou(pred: &[i32], truth: &[i32], num_classes: usize) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return arg_err(format!("{} predictions for {} labels", pred.len(), truth.len()));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    let mut unassigned = vec![0u64; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if t < 0 {
            continue;
        }
        if t as usize >= num_classes {
            return arg_err(format!("label {t} outside {num_classes} classes"));
        }
        if p < 0 || p as usize >= num_classes {
            unassigned[t as usize] += 1;
        } else {
            counts[t as usize][p as usize] += 1;
        }
    }
    let confusion = ConfusionMatrix { counts, unassigned };
    let total = confusion.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("no labeled points to evaluate".into()));
    }
    let c = &confusion.counts;
    let iou: Vec<Option<f64>> = (0..num_classes)
        .map(|k| {
            let tp = c[k][k];
            let row: u64 = c[k].iter().sum::<u64>() + confusion.unassigned[k];
            let col: u64 = c.iter().map(|r| r[k]).sum();
            let denom = row + col - tp;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = iou.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    let oa = (0..num_classes).map(|k| c[k][k]).sum::<u64>() as f64 / total as f64;
    Ok(Metrics { confusion, iou, miou, oa })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAssignment {
    /// Majority label per component, −1 when it holds no labeled point.
    pub component_class: Vec<i32>,
    pub point_prediction: Vec<i32>,
}

/// Majority label of every group of points, inherited by its members.
pub fn oracle_from_groups(groups: &[Vec<usize>], labels: &[i32]) -> OracleAssignment {
    let component_class: Vec<i32> =
        groups.iter().map(|g| majority_label(g.iter().map(|&p| labels[p])).unwrap_or(-1)).collect();
    let mut point_prediction = vec![-1; labels.len()];
    for (g, &c) in groups.iter().zip(&component_class) {
        for &p in g {
            point_prediction[p] = c;
        }
    }
    OracleAssignment { component_class, point_prediction }
}

/// Oracle prediction of level `level` (0 being the points themselves).
pub fn oracle_assign(hp: &HierarchicalPartition, labels: &[i32], level: usize) -> Result<OracleAssignment> {
    if labels.len() != hp.point_count() {
        return arg_err("labels do not cover the points");
    }
    if level > hp.level_count() {
        return arg_err(format!("level {level} above the top level {}", hp.level_count()));
    }
    Ok(oracle_from_groups(&hp.point_members(level), labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Grid values are λ for a single-level partition.
    Partition,
    /// Grid values are voxel sizes.
    Voxel,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partition" => Ok(SweepMode::Partition),
            "voxel" => Ok(SweepMode::Voxel),
            _ => Err(Error::Argument(format!("unknown sweep mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub grid_param: f64,
    pub component_count: usize,
    pub oracle_miou: f64,
    pub oracle_oa: f64,
}

fn num_classes(labels: &[i32]) -> usize {
    labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
}

/// Oracle purity of partitions (or voxel grids) across a parameter grid,
/// evaluated on every input point.
///
/// In partition mode the cloud is first voxelized at `config.voxel`; the
/// features and adjacency graph are computed once and each λ is solved
/// independently.
pub fn purity_sweep(cloud: &PointCloud, grid: &[f64], mode: SweepMode, config: &PipelineConfig) -> Result<Vec<SweepRow>> {
    let Some(labels) = cloud.labels.as_deref() else {
        return arg_err("purity sweep needs a labeled cloud");
    };
    if grid.iter().any(|&g| !(g > 0.0)) {
        return arg_err("grid values must be > 0");
    }
    let k = num_classes(labels);
    let row = |g: f64, groups: &[Vec<usize>]| -> Result<SweepRow> {
        let oracle = oracle_from_groups(groups, labels);
        let m = confusion_and_miou(&oracle.point_prediction, labels, k)?;
        Ok(SweepRow { grid_param: g, component_count: groups.len(), oracle_miou: m.miou, oracle_oa: m.oa })
    };
    match mode {
        SweepMode::Voxel => grid
            .par_iter()
            .map(|&size| {
                let (_, grouping) = voxel_subsample(cloud, size)?;
                row(size, &grouping.groups)
            })
            .collect(),
        SweepMode::Partition => {
            let (vox, grouping) = if config.voxel > 0.0 {
                voxel_subsample(cloud, config.voxel)?
            } else {
                (cloud.clone(), crate::cloud_io::VoxelGrouping { groups: (0..cloud.len()).map(|i| vec![i]).collect() })
            };
            let n = vox.len();
            if n < 3 {
                return arg_err("too few points for a partition sweep");
            }
            let kk = config.features.k_feat.max(config.k_adj).min(n - 1);
            let table = knn_indices(&vox.positions, kk)?;
            let feats = assemble_with_neighbors(&vox, &table.truncate(config.features.k_feat.min(kk)), &config.features)?;
            let (f, dim) = partition_signal(&feats, config.geometric_weight, config.radiometric_weight);
            let graph = knn_graph_from_table(&table.truncate(config.k_adj.min(kk)))?;
            grid.par_iter()
                .map(|&lambda| {
                    let solver = SolverConfig { lambda, ..config.solver.clone() };
                    let part = minimize_l0(&f, dim, &graph, &solver)?;
                    let mut groups = vec![Vec::new(); part.component_count()];
                    for (v, &c) in part.super_index().iter().enumerate() {
                        groups[c].extend_from_slice(&grouping.groups[v]);
                    }
                    row(lambda, &groups)
                })
                .collect()
        }
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "grid_param,component_count,oracle_miou,oracle_oa")?;
    for r in rows {
        writeln!(w, "{:.6},{},{:.6},{:.6}", r.grid_param, r.component_count, r.oracle_miou, r.oracle_oa)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let t = [0, 1, 2, 1, -1];
        let m = confusion_and_miou(&t, &t, 3).unwrap();
        assert_eq!((m.miou, m.oa), (1.0, 1.0));
        assert_eq!(m.confusion.total(), 4);
    }

    #[test]
    fn binary_thirds() {
        let truth = [0, 0, 1, 1];
        let pred = [0, 1, 1, 0];
        let m = confusion_and_miou(&pred, &truth, 2).unwrap();
        assert_eq!(m.iou, vec![Some(1.0 / 3.0), Some(1.0 / 3.0)]);
        assert_eq!(m.oa, 0.5);
    }

    #[test]
    fn absent_class_excluded_and_unlabeled_undefined() {
        let m = confusion_and_miou(&[0, 0], &[0, 0], 3).unwrap();
        assert_eq!(m.iou, vec![Some(1.0), None, None]);
        assert_eq!(m.miou, 1.0);
        assert!(matches!(confusion_and_miou(&[0], &[-1], 2), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn oracle_majority() {
        let groups = vec![vec![0, 1, 2, 3], vec![4]];
        let o = oracle_from_groups(&groups, &[0, 1, 0, 0, -1]);
        assert_eq!(o.component_class, vec![0, -1]);
        assert_eq!(o.point_prediction, vec![0, 0, 0, 0, -1]);
    }

    #[test]
    fn csv_format() {
        let rows = [SweepRow { grid_param: 0.5, component_count: 12, oracle_miou: 0.25, oracle_oa: 1.0 / 3.0 }];
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "grid_param,component_count,oracle_miou,oracle_oa\n0.500000,12,0.250000,0.333333\n"
        );
    }
}
