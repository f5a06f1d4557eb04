//! Named parameter tensors and their on-disk blob.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{arg_err, Error, Result};

/// All network weights, addressed by dotted names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamBundle {
    tensors: BTreeMap<String, DenseMatrix>,
}

impl ParamBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, m: DenseMatrix) {
        self.tensors.insert(name.into(), m);
    }

    pub fn get(&self, name: &str) -> Result<&DenseMatrix> {
        self.tensors.get(name).ok_or_else(|| Error::Argument(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseMatrix> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut DenseMatrix)> {
        self.tensors.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(|m| m.data().len()).sum()
    }

    /// Uniform `±1/√fan_in` weights with `fan_in = rows`.
    pub(crate) fn init_uniform(&mut self, name: String, rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, DenseMatrix::from_vec(rows, cols, data).expect("sized data"));
    }

    pub(crate) fn init_const(&mut self, name: String, cols: usize, value: f64) {
        self.insert(name, DenseMatrix::from_vec(1, cols, vec![value; cols]).expect("sized data"));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub total_bytes: usize,
    pub tensors: Vec<TensorEntry>,
}

/// Flat little-endian `f64` blob plus its JSON manifest.
pub fn to_blob(params: &ParamBundle) -> (Vec<u8>, String) {
    let mut blob = Vec::with_capacity(8 * params.scalar_count());
    let mut tensors = Vec::with_capacity(params.len());
    for (name, m) in &params.tensors {
        tensors.push(TensorEntry { name: name.clone(), shape: [m.rows(), m.cols()], offset: blob.len() });
        for v in m.data() {
            blob.extend(v.to_le_bytes());
        }
    }
    let manifest = Manifest { dtype: "f64-le".into(), total_bytes: blob.len(), tensors };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    (blob, text)
}

pub fn from_blob(blob: &[u8], manifest: &str) -> Result<ParamBundle> {
    let m: Manifest = serde_json::from_str(manifest).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if m.dtype != "f64-le" {
        return Err(Error::Format(format!("unsupported dtype {}", m.dtype)));
    }
    if m.total_bytes != blob.len() {
        return Err(Error::Format(format!("blob has {} bytes, manifest says {}", blob.len(), m.total_bytes)));
    }
    let mut out = ParamBundle::new();
    for t in m.tensors {
        let n = t.shape[0] * t.shape[1];
        let end = t.offset.checked_add(8 * n).filter(|&e| e <= blob.len());
        let Some(end) = end else {
            return Err(Error::Format(format!("tensor {} runs past the blob", t.name)));
        };
        let data = blob[t.offset..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if out.contains(&t.name) {
            return Err(Error::Format(format!("duplicate tensor {}", t.name)));
        }
        out.insert(t.name, DenseMatrix::from_vec(t.shape[0], t.shape[1], data)?);
    }
    Ok(out)
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn save_params(params: &ParamBundle, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let (blob, manifest) = to_blob(params);
    std::fs::write(stem.with_extension("bin"), blob)?;
    std::fs::write(stem.with_extension("json"), manifest)?;
    Ok(())
}

pub fn load_params(stem: impl AsRef<Path>) -> Result<ParamBundle> {
    let stem = stem.as_ref();
    let blob = std::fs::read(stem.with_extension("bin"))?;
    let manifest = std::fs::read_to_string(stem.with_extension("json"))?;
    from_blob(&blob, &manifest)
}

pub(crate) fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return arg_err(format!("{name} must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_roundtrip() {
        let mut rng = crate::util::rng(1);
        let mut p = ParamBundle::new();
        p.init_uniform("a.w".into(), 3, 2, 3, &mut rng);
        p.init_const("a.b".into(), 2, 0.0);
        p.insert("z", DenseMatrix::from_vec(1, 2, vec![f64::MIN_POSITIVE, -0.0]).unwrap());
        let (blob, man) = to_blob(&p);
        assert_eq!(blob.len(), 8 * 10);
        let back = from_blob(&blob, &man).unwrap();
        assert_eq!(to_blob(&back), (blob.clone(), man.clone()));
        assert_eq!(back.get("z").unwrap().data()[1].to_bits(), (-0.0f64).to_bits());
        assert!(from_blob(&blob[..blob.len() - 1], &man).is_err());
        assert!(from_blob(&blob, "{").is_err());
    }
}
