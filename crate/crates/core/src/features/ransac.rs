use rand::seq::index::sample;
use rayon::prelude::*;

use super::pca::pca_of_points;
use crate::cloud_io::{voxel_subsample, PointCloud};
use crate::error::{Error, Result};
use crate::util::{cross, dot, norm};
use crate::Vec3;

/// Plane `{x : normal·x = offset}` with an upward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_count: usize,
}

impl GroundPlane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        dot(&self.normal, p) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    pub inlier_threshold: f64,
    pub coarse_voxel: f64,
    pub seed: u64,
}

impl RansacConfig {
    pub fn with_seed(seed: u64) -> Self {
        RansacConfig { iterations: 500, inlier_threshold: 0.1, coarse_voxel: 0.5, seed }
    }
}

fn count_inliers(pts: &[Vec3], normal: &Vec3, offset: f64, thr: f64) -> usize {
    pts.par_iter().filter(|p| (dot(normal, p) - offset).abs() <= thr).count()
}

fn orient(normal: Vec3, offset: f64, pts: &[Vec3]) -> (Vec3, f64) {
    let up = if normal[2].abs() > 1e-12 {
        normal[2] > 0.0
    } else {
        let above = pts.iter().filter(|p| dot(&normal, p) - offset > 0.0).count();
        2 * above >= pts.len()
    };
    if up {
        (normal, offset)
    } else {
        (normal.map(|c| -c), -offset)
    }
}

/// RANSAC ground plane on a coarse voxel subsampling, refit by least squares
/// on the full-resolution inliers.
pub fn estimate_ground_plane(cloud: &PointCloud, config: &RansacConfig) -> Result<GroundPlane> {
    let coarse = if config.coarse_voxel > 0.0 {
        voxel_subsample(&PointCloud::from_positions(cloud.positions.clone()), config.coarse_voxel)?
            .0
            .positions
    } else {
        cloud.positions.clone()
    };
    if coarse.len() < 3 {
        return Err(Error::Estimation(format!(
            "need at least 3 points after coarse subsampling, got {}",
            coarse.len()
        )));
    }
    let mut rng = crate::util::rng(config.seed);
    let thr = config.inlier_threshold;
    let mut best: Option<(Vec3, f64, usize)> = None;
    for _ in 0..config.iterations.max(1) {
        let idx = sample(&mut rng, coarse.len(), 3);
        let (a, b, c) = (coarse[idx.index(0)], coarse[idx.index(1)], coarse[idx.index(2)]);
        let n = cross(&crate::util::sub(&b, &a), &crate::util::sub(&c, &a));
        let len = norm(&n);
        let scale = norm(&crate::util::sub(&b, &a)) * norm(&crate::util::sub(&c, &a));
        if !(len > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            continue;
        }
        let n = n.map(|v| v / len);
        let d = dot(&n, &a);
        let inl = count_inliers(&coarse, &n, d, thr);
        if best.is_none_or(|(_, _, bi)| inl > bi) {
            best = Some((n, d, inl));
        }
    }
    let Some((mut n, mut d, _)) = best else {
        return Err(Error::Estimation("all sampled triplets are collinear".into()));
    };

    // least-squares refit on full-resolution inliers
    let full = &cloud.positions;
    let inliers: Vec<&Vec3> = full.iter().filter(|p| (dot(&n, p) - d).abs() <= thr).collect();
    let mut count = inliers.len();
    if inliers.len() >= 3 {
        let pca = pca_of_points(inliers.iter().copied());
        if pca.eigenvalues[1] > 0.0 {
            let mean = crate::util::mean_point(inliers.iter().copied());
            let rn = pca.normal();
            let rd = dot(&rn, &mean);
            let rc = count_inliers(full, &rn, rd, thr);
            if rc >= count {
                n = rn;
                d = rd;
                count = rc;
            }
        }
    }
    let (normal, offset) = orient(n, d, full);
    Ok(GroundPlane { normal, offset, inlier_count: count })
}
