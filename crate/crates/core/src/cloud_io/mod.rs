//! Point cloud ingestion, voxel subsampling and spherical sampling.

pub mod ply;
mod voxel;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{arg_err, Error, Result};
use crate::neighborhood::KdTree;
use crate::Vec3;
use ply::{Column, Encoding, ScalarType, VertexTable};

pub use voxel::{voxel_subsample, VoxelGrouping};

/// Point positions with optional radiometry (`R` channels in [0,1]) and
/// optional integer labels (`-1` = unlabeled).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    /// Row-major `N × radiometry_dim`.
    pub radiometry: Vec<f64>,
    pub radiometry_dim: usize,
    pub labels: Option<Vec<i32>>,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<Vec3>) -> Self {
        PointCloud { positions, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn radiometry_row(&self, i: usize) -> &[f64] {
        let r = self.radiometry_dim;
        &self.radiometry[i * r..(i + 1) * r]
    }

    /// Checks the structural invariants of the cloud.
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.radiometry_dim, 0 | 1 | 3) {
            return arg_err(format!("radiometry dimension {} not in {{0,1,3}}", self.radiometry_dim));
        }
        if self.radiometry.len() != self.len() * self.radiometry_dim {
            return arg_err("radiometry length does not match point count");
        }
        if let Some(p) = self.positions.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return arg_err(format!("non-finite position at point {p}"));
        }
        if self.radiometry.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return arg_err("radiometry outside [0,1]");
        }
        if let Some(l) = &self.labels {
            if l.len() != self.len() {
                return arg_err("label count does not match point count");
            }
            if l.iter().any(|&v| v < -1) {
                return arg_err("labels must be >= -1");
            }
        }
        Ok(())
    }

    /// Sub-cloud made of the given point indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let r = self.radiometry_dim;
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            radiometry: indices.iter().flat_map(|&i| self.radiometry_row(i).to_vec()).collect(),
            radiometry_dim: r,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// How file properties map onto cloud fields.
#[derive(Debug, Clone)]
pub struct PropertyMap {
    /// Label property. `None` looks for an optional `label` property;
    /// `Some(name)` requires that property to exist.
    pub label: Option<String>,
    /// Divisor applied to a float `intensity` property.
    pub intensity_max: f64,
}

impl Default for PropertyMap {
    fn default() -> Self {
        PropertyMap { label: None, intensity_max: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PlyBinary,
    Xyz,
}

pub fn read_cloud(path: impl AsRef<Path>, mapping: &PropertyMap) -> Result<PointCloud> {
    let mut reader = BufReader::new(File::open(path)?);
    let is_ply = reader.fill_buf()?.starts_with(b"ply");
    if is_ply {
        let table = ply::read_vertex_table(reader)?;
        cloud_from_table(&table, mapping)
    } else {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        read_xyz(&text)
    }
}

fn cloud_from_table(table: &VertexTable, mapping: &PropertyMap) -> Result<PointCloud> {
    let coord = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing vertex property {name}") })
    };
    let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
    let positions: Vec<Vec3> =
        (0..table.count).map(|i| [x.values[i], y.values[i], z.values[i]]).collect();

    let scale = |c: &Column, max: f64| -> Vec<f64> {
        let div = c.ty.integer_max().unwrap_or(max);
        c.values.iter().map(|v| (v / div).clamp(0.0, 1.0)).collect()
    };
    let (radiometry, radiometry_dim) =
        match (table.column("red"), table.column("green"), table.column("blue")) {
            (Some(r), Some(g), Some(b)) => {
                let (r, g, b) = (scale(r, 1.0), scale(g, 1.0), scale(b, 1.0));
                let rad = (0..table.count).flat_map(|i| [r[i], g[i], b[i]]).collect();
                (rad, 3)
            }
            _ => match table.column("intensity") {
                Some(c) => {
                    if !(mapping.intensity_max > 0.0) {
                        return Err(Error::Config("intensity_max must be positive".into()));
                    }
                    (scale(c, mapping.intensity_max), 1)
                }
                None => (Vec::new(), 0),
            },
        };

    let label_col = match &mapping.label {
        Some(name) => Some(table.column(name).ok_or_else(|| {
            Error::Config(format!("label property '{name}' not present in file"))
        })?),
        None => table.column("label"),
    };
    let labels = label_col.map(|c| c.values.iter().map(|&v| v as i32).collect());

    let cloud = PointCloud { positions, radiometry, radiometry_dim, labels };
    cloud.validate()?;
    Ok(cloud)
}

/// Whitespace-separated `x y z [r g b] [label]`, colors in 0..=255.
fn read_xyz(text: &str) -> Result<PointCloud> {
    let mut cloud = PointCloud::default();
    let mut width = None;
    let mut labels = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: ln + 1, msg: e.to_string() })?;
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected {w} columns, found {}", vals.len()),
                })
            }
            _ => {}
        }
        if !matches!(vals.len(), 3 | 4 | 6 | 7) {
            return Err(Error::Parse {
                line: ln + 1,
                msg: format!("unsupported column count {}", vals.len()),
            });
        }
        cloud.positions.push([vals[0], vals[1], vals[2]]);
        if vals.len() >= 6 {
            cloud.radiometry.extend(vals[3..6].iter().map(|v| (v / 255.0).clamp(0.0, 1.0)));
        }
        if vals.len() == 4 || vals.len() == 7 {
            labels.push(*vals.last().unwrap() as i32);
        }
    }
    let w = width.unwrap_or(3);
    cloud.radiometry_dim = if w >= 6 { 3 } else { 0 };
    if w == 4 || w == 7 {
        cloud.labels = Some(labels);
    }
    cloud.validate()?;
    Ok(cloud)
}

fn cloud_table(cloud: &PointCloud, extra: &[(&str, &[f64])]) -> VertexTable {
    let n = cloud.len();
    let mut columns = Vec::new();
    for (d, name) in ["x", "y", "z"].iter().enumerate() {
        columns.push(Column {
            name: name.to_string(),
            ty: ScalarType::F32,
            values: cloud.positions.iter().map(|p| p[d]).collect(),
        });
    }
    match cloud.radiometry_dim {
        3 => {
            for (d, name) in ["red", "green", "blue"].iter().enumerate() {
                columns.push(Column {
                    name: name.to_string(),
                    ty: ScalarType::U8,
                    values: (0..n).map(|i| (cloud.radiometry[3 * i + d] * 255.0).round()).collect(),
                });
            }
        }
        1 => columns.push(Column {
            name: "intensity".into(),
            ty: ScalarType::F32,
            values: cloud.radiometry.clone(),
        }),
        _ => {}
    }
    if let Some(l) = &cloud.labels {
        columns.push(Column {
            name: "label".into(),
            ty: ScalarType::I32,
            values: l.iter().map(|&v| v as f64).collect(),
        });
    }
    for (name, values) in extra {
        columns.push(Column { name: name.to_string(), ty: ScalarType::F32, values: values.to_vec() });
    }
    VertexTable { count: n, columns }
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    write_cloud_with_scalars(cloud, &[], path, format)
}

/// Writes the cloud plus extra per-point float properties. XYZ output
/// ignores the extra columns.
pub fn write_cloud_with_scalars(
    cloud: &PointCloud,
    extra: &[(&str, &[f64])],
    path: impl AsRef<Path>,
    format: CloudFormat,
) -> Result<()> {
    cloud.validate()?;
    for (name, v) in extra {
        if v.len() != cloud.len() {
            return arg_err(format!("extra property {name} has wrong length"));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        CloudFormat::PlyAscii => ply::write_vertex_table(w, &cloud_table(cloud, extra), Encoding::Ascii),
        CloudFormat::PlyBinary => {
            ply::write_vertex_table(w, &cloud_table(cloud, extra), Encoding::BinaryLittleEndian)
        }
        CloudFormat::Xyz => {
            if cloud.radiometry_dim == 1 {
                return arg_err("XYZ text cannot carry intensity");
            }
            for i in 0..cloud.len() {
                let p = cloud.positions[i];
                let mut line = format!("{} {} {}", p[0], p[1], p[2]);
                for v in cloud.radiometry_row(i) {
                    line.push_str(&format!(" {}", (v * 255.0).round() as u8));
                }
                if let Some(l) = &cloud.labels {
                    line.push_str(&format!(" {}", l[i]));
                }
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// Indices of all points within `radius` of `center`, ascending.
pub fn sample_sphere(cloud: &PointCloud, center: Vec3, radius: f64) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return arg_err(format!("sphere radius must be positive, got {radius}"));
    }
    Ok(KdTree::new(&cloud.positions).within(&center, radius))
}

/// Label histogram, keyed by class id.
pub fn label_histogram(labels: &[i32]) -> BTreeMap<i32, usize> {
    let mut h = BTreeMap::new();
    for &l in labels {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}
