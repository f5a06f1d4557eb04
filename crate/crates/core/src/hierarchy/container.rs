//! `SPH1` binary container, little-endian.
//!
//! Layout: `"SPH1"`, u8 version, u8 level count `I`, u64 feature dim `D`,
//! then per level: u64 element count of the level below, u64 component
//! count `S`, u64[] super index, f32[S×3] centroids, f32[S×D] mean features,
//! u64[S] point counts, f32[S] radii. Then per level a graph block: u8
//! presence flag, and if present u64 edge count `E`, u64[E×2] edges,
//! f32[E×18] features, f32[E] gaps. Finally the points: u64 `N`,
//! f32[N×3] positions, u8 label flag, i32[N] labels if flagged.

use std::io::{Read, Write};

use super::{HierarchicalPartition, Level};
use crate::error::{Error, Result};
use crate::spgraph::{SuperpointGraph, ADJACENCY_DIM};
use crate::Vec3;

const MAGIC: &[u8; 4] = b"SPH1";
const VERSION: u8 = 1;

/// Everything a partition run produces, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Sph1 {
    pub positions: Vec<Vec3>,
    pub labels: Option<Vec<i32>>,
    pub hierarchy: HierarchicalPartition,
    /// One optional graph per level `1..=I`.
    pub graphs: Vec<Option<SuperpointGraph>>,
}

impl Sph1 {
    pub fn new(positions: Vec<Vec3>, labels: Option<Vec<i32>>, hierarchy: HierarchicalPartition) -> Self {
        let graphs = vec![None; hierarchy.level_count()];
        Sph1 { positions, labels, hierarchy, graphs }
    }
}

fn fmt_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn put_u64(w: &mut impl Write, v: usize) -> Result<()> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn put_f32s(w: &mut impl Write, vals: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut buf = Vec::new();
    for v in vals {
        buf.extend((v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_sph1(w: &mut impl Write, data: &Sph1) -> Result<()> {
    let hp = &data.hierarchy;
    if hp.level_count() > u8::MAX as usize {
        return fmt_err("too many levels for SPH1");
    }
    if data.graphs.len() != hp.level_count() {
        return fmt_err("one graph slot per level is required");
    }
    if data.positions.len() != hp.point_count() {
        return fmt_err("positions do not match the hierarchy");
    }
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, hp.level_count() as u8])?;
    put_u64(w, hp.feature_dim())?;
    for l in hp.levels() {
        put_u64(w, l.element_count())?;
        put_u64(w, l.component_count())?;
        let mut buf = Vec::with_capacity(8 * l.element_count());
        for &s in &l.super_index {
            buf.extend((s as u64).to_le_bytes());
        }
        w.write_all(&buf)?;
        put_f32s(w, l.centroids.iter().flatten().copied())?;
        put_f32s(w, l.mean_features.iter().copied())?;
        let mut buf = Vec::with_capacity(8 * l.component_count());
        for &c in &l.point_counts {
            buf.extend((c as u64).to_le_bytes());
        }
        w.write_all(&buf)?;
        put_f32s(w, l.radii.iter().copied())?;
    }
    for g in &data.graphs {
        match g {
            None => w.write_all(&[0])?,
            Some(g) => {
                w.write_all(&[1])?;
                put_u64(w, g.edge_count())?;
                let mut buf = Vec::with_capacity(16 * g.edge_count());
                for &(p, q) in &g.edges {
                    buf.extend((p as u64).to_le_bytes());
                    buf.extend((q as u64).to_le_bytes());
                }
                w.write_all(&buf)?;
                put_f32s(w, g.features.iter().flatten().copied())?;
                put_f32s(w, g.gaps.iter().copied())?;
            }
        }
    }
    put_u64(w, data.positions.len())?;
    put_f32s(w, data.positions.iter().flatten().copied())?;
    match &data.labels {
        None => w.write_all(&[0])?,
        Some(labels) => {
            w.write_all(&[1])?;
            let mut buf = Vec::with_capacity(4 * labels.len());
            for &l in labels {
                buf.extend(l.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        if buf.len() != n {
            return fmt_err("unexpected end of SPH1 data");
        }
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.bytes(8)?.try_into().unwrap());
        usize::try_from(v).or_else(|_| fmt_err("count overflows usize"))
    }

    fn count(&mut self, limit: usize) -> Result<usize> {
        let n = self.u64()?;
        if n > limit {
            return fmt_err(format!("implausible count {n}"));
        }
        Ok(n)
    }

    fn u64s(&mut self, n: usize) -> Result<Vec<usize>> {
        Ok(self.bytes(8 * n)?.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize).collect())
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.bytes(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }

    fn vec3s(&mut self, n: usize) -> Result<Vec<Vec3>> {
        Ok(self.f32s(3 * n)?.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }
}

const MAX_COUNT: usize = 1 << 40;

pub fn read_sph1(r: impl Read) -> Result<Sph1> {
    let mut r = Reader { inner: r };
    if r.bytes(4)? != MAGIC {
        return fmt_err("missing SPH1 magic");
    }
    let version = r.u8()?;
    if version != VERSION {
        return fmt_err(format!("unsupported SPH1 version {version}"));
    }
    let level_count = r.u8()? as usize;
    let dim = r.count(1 << 20)?;
    let mut levels = Vec::with_capacity(level_count);
    let mut point_count = None;
    for _ in 0..level_count {
        let n = r.count(MAX_COUNT)?;
        point_count.get_or_insert(n);
        let s = r.count(MAX_COUNT)?;
        let super_index = r.u64s(n)?;
        let centroids = r.vec3s(s)?;
        let mean_features = r.f32s(s * dim)?;
        let point_counts = r.u64s(s)?;
        let radii = r.f32s(s)?;
        levels.push(Level { super_index, centroids, mean_features, point_counts, radii });
    }
    let mut graphs = Vec::with_capacity(level_count);
    for i in 0..level_count {
        match r.u8()? {
            0 => graphs.push(None),
            1 => {
                let e = r.count(MAX_COUNT)?;
                let flat = r.u64s(2 * e)?;
                let s = levels[i].point_counts.len();
                if flat.iter().any(|&v| v >= s) {
                    return fmt_err(format!("level {} graph references a missing superpoint", i + 1));
                }
                let edges = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
                let features = r
                    .f32s(ADJACENCY_DIM * e)?
                    .chunks_exact(ADJACENCY_DIM)
                    .map(|c| c.try_into().unwrap())
                    .collect();
                let gaps = r.f32s(e)?;
                graphs.push(Some(SuperpointGraph { level: i + 1, edges, features, gaps }));
            }
            f => return fmt_err(format!("bad graph flag {f}")),
        }
    }
    let n = r.count(MAX_COUNT)?;
    if point_count.is_some_and(|p| p != n) {
        return fmt_err("point block disagrees with level 1");
    }
    let positions = r.vec3s(n)?;
    let labels = match r.u8()? {
        0 => None,
        1 => Some(r.bytes(4 * n)?.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect()),
        f => return fmt_err(format!("bad label flag {f}")),
    };
    let hierarchy = HierarchicalPartition::from_levels(n, dim, levels).map_err(|e| Error::Format(e.to_string()))?;
    Ok(Sph1 { positions, labels, hierarchy, graphs })
}
