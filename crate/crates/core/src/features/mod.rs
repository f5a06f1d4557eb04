//! Handcrafted point features: local PCA dimensionality, verticality,
//! elevation above a RANSAC ground plane, and radiometry.

mod pca;
mod ransac;

use rayon::prelude::*;

pub use pca::{covariance, local_pca, pca_of_covariance, pca_of_points, LocalPca};
pub use ransac::{estimate_ground_plane, GroundPlane, RansacConfig};

use crate::cloud_io::PointCloud;
use crate::error::{arg_err, Result};
use crate::neighborhood::{knn_indices, NeighborTable};
use crate::Vec3;

/// Names of the geometric block, in storage order.
pub const GEOMETRIC_NAMES: [&str; 5] = ["linearity", "planarity", "scattering", "verticality", "elevation"];

/// Per-point features laid out as
/// `[linearity, planarity, scattering, verticality, elevation | radiometry | μ·xyz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatureTable {
    pub geometric: Vec<[f64; 5]>,
    /// Row-major `N × radiometric_dim`.
    pub radiometric: Vec<f64>,
    pub radiometric_dim: usize,
    pub spatial: Option<Vec<Vec3>>,
}

impl PointFeatureTable {
    pub fn len(&self) -> usize {
        self.geometric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometric.is_empty()
    }

    pub fn dim(&self) -> usize {
        5 + self.radiometric_dim + if self.spatial.is_some() { 3 } else { 0 }
    }

    /// Concatenated feature row in documented order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut r = self.geometric[i].to_vec();
        let rd = self.radiometric_dim;
        r.extend_from_slice(&self.radiometric[i * rd..(i + 1) * rd]);
        if let Some(s) = &self.spatial {
            r.extend_from_slice(&s[i]);
        }
        r
    }
}

/// `(linearity, planarity, scattering, verticality)` from square-rooted
/// eigenvalues. Verticality is the z share of `Σ sᵢ·|eᵢ|`.
pub fn dimensionality_features(pca: &LocalPca) -> [f64; 4] {
    let [s1, s2, s3] = pca.sigmas();
    if !(s1 > 0.0) {
        return [0.0; 4];
    }
    let lin = ((s1 - s2) / s1).clamp(0.0, 1.0);
    let plan = ((s2 - s3) / s1).clamp(0.0, 1.0);
    let scat = (s3 / s1).clamp(0.0, 1.0);
    let mut u = [0.0; 3];
    for (s, e) in [s1, s2, s3].iter().zip(&pca.eigenvectors) {
        for d in 0..3 {
            u[d] += s * e[d].abs();
        }
    }
    let un = crate::util::norm(&u);
    let vert = if un > 0.0 { (u[2] / un).clamp(0.0, 1.0) } else { 0.0 };
    [lin, plan, scat, vert]
}

/// Signed height above the plane divided by `divisor`, clamped to [0,1].
pub fn elevation_feature(positions: &[Vec3], plane: &GroundPlane, divisor: f64) -> Result<Vec<f64>> {
    if !(divisor > 0.0) {
        return arg_err(format!("elevation divisor must be positive, got {divisor}"));
    }
    Ok(positions.par_iter().map(|p| (plane.signed_distance(p) / divisor).clamp(0.0, 1.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub k_feat: usize,
    /// Spatial factor in 1/m.
    pub mu: f64,
    pub elevation_divisor: f64,
    pub include_spatial: bool,
    pub ransac: RansacConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            k_feat: 50,
            mu: 0.0,
            elevation_divisor: 4.0,
            include_spatial: false,
            ransac: RansacConfig::with_seed(0),
        }
    }
}

/// Runs the whole point feature chain: neighbors, local PCA, dimensionality,
/// elevation, radiometry and the optional spatial block.
pub fn assemble_point_features(cloud: &PointCloud, config: &FeatureConfig) -> Result<PointFeatureTable> {
    let k = config.k_feat.min(cloud.len().saturating_sub(1));
    let table = knn_indices(&cloud.positions, k)?;
    assemble_with_neighbors(cloud, &table, config)
}

pub fn assemble_with_neighbors(
    cloud: &PointCloud,
    neighbors: &NeighborTable,
    config: &FeatureConfig,
) -> Result<PointFeatureTable> {
    cloud.validate()?;
    if neighbors.k < 2 {
        return arg_err("local PCA needs at least 2 neighbors (3 points with self)");
    }
    let plane = estimate_ground_plane(cloud, &config.ransac)?;
    let elevation = elevation_feature(&cloud.positions, &plane, config.elevation_divisor)?;
    let pcas = local_pca(&cloud.positions, neighbors);
    let geometric = pcas
        .par_iter()
        .zip(elevation.par_iter())
        .map(|(pca, &e)| {
            let [l, p, s, v] = dimensionality_features(pca);
            [l, p, s, v, e]
        })
        .collect();
    let spatial = config
        .include_spatial
        .then(|| cloud.positions.iter().map(|p| p.map(|c| c * config.mu)).collect());
    Ok(PointFeatureTable {
        geometric,
        radiometric: cloud.radiometry.clone(),
        radiometric_dim: cloud.radiometry_dim,
        spatial,
    })
}
