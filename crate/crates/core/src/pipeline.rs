//! End-to-end preprocessing: voxelization, features, adjacency graph,
//! hierarchical partition and superpoint graphs.

use std::time::Instant;

use crate::cloud_io::{voxel_subsample, PointCloud, VoxelGrouping};
use crate::cut_pursuit::SolverConfig;
use crate::error::{arg_err, Result};
use crate::features::{assemble_with_neighbors, FeatureConfig, PointFeatureTable};
use crate::hierarchy::{build_hierarchy, HierarchicalPartition, HierarchyConfig};
use crate::neighborhood::{knn_graph_from_table, knn_indices, WeightedGraph};
use crate::spgraph::{build_superpoint_graph, SpGraphConfig, SuperpointGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Voxel size in meters; 0 keeps every point.
    pub voxel: f64,
    pub features: FeatureConfig,
    /// Neighbors per point in the partition graph.
    pub k_adj: usize,
    pub geometric_weight: f64,
    pub radiometric_weight: f64,
    pub lambdas: Vec<f64>,
    pub solver: SolverConfig,
    pub weighted_fidelity: bool,
    pub graph: SpGraphConfig,
    pub build_graphs: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let voxel = 0.03;
        PipelineConfig {
            voxel,
            features: FeatureConfig::default(),
            k_adj: 10,
            geometric_weight: 1.0,
            radiometric_weight: 1.0,
            lambdas: vec![0.003, 0.03],
            solver: SolverConfig::default(),
            weighted_fidelity: true,
            graph: SpGraphConfig::for_voxel(voxel),
            build_graphs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub millis: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The voxelized cloud every later stage works on.
    pub cloud: PointCloud,
    pub grouping: VoxelGrouping,
    pub features: PointFeatureTable,
    /// Row-major `N × signal_dim` partition signal.
    pub signal: Vec<f64>,
    pub signal_dim: usize,
    pub graph: WeightedGraph,
    pub hierarchy: HierarchicalPartition,
    pub graphs: Vec<SuperpointGraph>,
    pub timings: Vec<StageTiming>,
}

/// Weighted concatenation of the feature blocks used as partition signal.
pub fn partition_signal(table: &PointFeatureTable, geometric_weight: f64, radiometric_weight: f64) -> (Vec<f64>, usize) {
    let dim = table.dim();
    let mut f = Vec::with_capacity(table.len() * dim);
    for i in 0..table.len() {
        f.extend(table.geometric[i].iter().map(|v| v * geometric_weight));
        let rd = table.radiometric_dim;
        f.extend(table.radiometric[i * rd..(i + 1) * rd].iter().map(|v| v * radiometric_weight));
        if let Some(s) = &table.spatial {
            f.extend_from_slice(&s[i]);
        }
    }
    (f, dim)
}

pub fn run_pipeline(cloud: &PointCloud, config: &PipelineConfig) -> Result<PipelineOutput> {
    cloud.validate()?;
    if cloud.len() < 3 {
        return arg_err("the pipeline needs at least 3 points");
    }
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming { stage, millis: clock.elapsed().as_secs_f64() * 1e3 });
        clock = Instant::now();
    };

    let (cloud, grouping) = if config.voxel > 0.0 {
        voxel_subsample(cloud, config.voxel)?
    } else {
        let groups = (0..cloud.len()).map(|i| vec![i]).collect();
        (cloud.clone(), VoxelGrouping { groups })
    };
    lap("voxel", &mut timings);

    let n = cloud.len();
    if n < 3 {
        return arg_err("fewer than 3 points remain after voxelization");
    }
    let k = config.features.k_feat.max(config.k_adj).min(n - 1);
    let table = knn_indices(&cloud.positions, k)?;
    lap("neighbors", &mut timings);

    let features = assemble_with_neighbors(&cloud, &table.truncate(config.features.k_feat.min(k)), &config.features)?;
    let (signal, signal_dim) = partition_signal(&features, config.geometric_weight, config.radiometric_weight);
    lap("features", &mut timings);

    let graph = knn_graph_from_table(&table.truncate(config.k_adj.min(k)))?;
    lap("adjacency", &mut timings);

    let hcfg = HierarchyConfig {
        lambdas: config.lambdas.clone(),
        solver: config.solver.clone(),
        weighted_fidelity: config.weighted_fidelity,
    };
    let hierarchy = build_hierarchy(&signal, signal_dim, &graph, &cloud.positions, &hcfg)?;
    lap("partition", &mut timings);

    let graphs = if config.build_graphs {
        (1..=hierarchy.level_count())
            .map(|i| build_superpoint_graph(&hierarchy, i, &cloud.positions, &config.graph))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    lap("graphs", &mut timings);

    Ok(PipelineOutput { cloud, grouping, features, signal, signal_dim, graph, hierarchy, graphs, timings })
}
