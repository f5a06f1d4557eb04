use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::neighborhood::NeighborTable;
use crate::Vec3;

/// Eigen-decomposition of a local covariance, eigenvalues descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPca {
    pub eigenvalues: [f64; 3],
    /// `eigenvectors[i]` belongs to `eigenvalues[i]`, unit length.
    pub eigenvectors: [Vec3; 3],
}

impl LocalPca {
    pub const DEGENERATE: LocalPca = LocalPca {
        eigenvalues: [0.0; 3],
        eigenvectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Square roots of the eigenvalues.
    pub fn sigmas(&self) -> [f64; 3] {
        self.eigenvalues.map(f64::sqrt)
    }

    /// Eigenvector of the smallest eigenvalue.
    pub fn normal(&self) -> Vec3 {
        self.eigenvectors[2]
    }
}

/// Population covariance of a point set around its mean.
pub fn covariance<'a>(pts: impl Iterator<Item = &'a Vec3> + Clone) -> (Vec3, [[f64; 3]; 3], usize) {
    let mean = crate::util::mean_point(pts.clone());
    let mut c = [[0.0; 3]; 3];
    let mut n = 0usize;
    for p in pts {
        let d = crate::util::sub(p, &mean);
        for i in 0..3 {
            for j in i..3 {
                c[i][j] += d[i] * d[j];
            }
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        for i in 0..3 {
            for j in i..3 {
                c[i][j] *= inv;
                c[j][i] = c[i][j];
            }
        }
    }
    (mean, c, n)
}

pub fn pca_of_covariance(c: &[[f64; 3]; 3]) -> LocalPca {
    let scale = c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return LocalPca::DEGENERATE;
    }
    let m = Matrix3::from_fn(|i, j| c[i][j]);
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = LocalPca::DEGENERATE;
    for (slot, &k) in order.iter().enumerate() {
        out.eigenvalues[slot] = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        let n = v.norm();
        out.eigenvectors[slot] = [v[0] / n, v[1] / n, v[2] / n];
    }
    out
}

pub fn pca_of_points<'a>(pts: impl Iterator<Item = &'a Vec3> + Clone) -> LocalPca {
    let (_, c, _) = covariance(pts);
    pca_of_covariance(&c)
}

/// PCA of each point's neighborhood (its table row plus itself).
pub fn local_pca(positions: &[Vec3], neighbors: &NeighborTable) -> Vec<LocalPca> {
    (0..positions.len())
        .into_par_iter()
        .map(|p| {
            let row = neighbors.row(p);
            let pts = std::iter::once(&positions[p]).chain(row.iter().map(|&q| &positions[q as usize]));
            pca_of_points(pts)
        })
        .collect()
}
