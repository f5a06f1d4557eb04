//! Hierarchical superpoint partitions of 3D point clouds.
//!
//! The crate covers the preprocessing side (point cloud ingestion, voxel
//! subsampling, handcrafted point features, recursive ℓ0 cut pursuit,
//! superpoint adjacency graphs with their 18 handcrafted edge features) and a
//! small dense reference of a superpoint transformer: attention with
//! adjacency encodings, GraphNorm, encoder/decoder dataflow, hierarchical
//! loss and superpoint-level augmentations.
//!
//! ```no_run
//! use superpart_core::pipeline::{run_pipeline, PipelineConfig};
//! use superpart_core::synthetic::{room_scene, SceneConfig};
//!
//! let cloud = room_scene(&SceneConfig::with_points(20_000, 0));
//! let out = run_pipeline(&cloud, &PipelineConfig::default()).unwrap();
//! println!("{} superpoints at level 1", out.hierarchy.level(1).component_count());
//! ```

pub mod cloud_io;
pub mod cut_pursuit;
mod error;
pub mod eval;
pub mod features;
pub mod hierarchy;
pub mod kernel;
pub mod neighborhood;
pub mod pipeline;
pub mod spgraph;
pub mod synthetic;
pub(crate) mod util;

pub use cloud_io::PointCloud;
pub use cut_pursuit::{Partition, SolverConfig};
pub use error::{Error, Result};
pub use hierarchy::HierarchicalPartition;
pub use kernel::matrix::DenseMatrix;
pub use neighborhood::WeightedGraph;
pub use spgraph::SuperpointGraph;

/// Three-component position or direction.
pub type Vec3 = [f64; 3];
