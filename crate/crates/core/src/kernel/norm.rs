use super::matrix::DenseMatrix;
use crate::error::{arg_err, Result};
use crate::util::ordered_sum;

pub const STD_FLOOR: f64 = 1e-5;

/// Per-sample, per-feature normalization:
/// `y = scale · (x − mean_scale · mean) / std + shift`.
///
/// `node_to_sample` groups rows into independent samples; `None` treats
/// all rows as one sample. `std` is taken around the shifted mean and
/// floored at [`STD_FLOOR`].
pub fn graph_norm(
    x: &DenseMatrix,
    node_to_sample: Option<&[usize]>,
    scale: &[f64],
    shift: &[f64],
    mean_scale: &[f64],
) -> Result<DenseMatrix> {
    let (s, d) = x.shape();
    if scale.len() != d || shift.len() != d || mean_scale.len() != d {
        return arg_err(format!("norm parameters do not match feature width {d}"));
    }
    let groups: Vec<Vec<usize>> = match node_to_sample {
        None => vec![(0..s).collect()],
        Some(map) => {
            if map.len() != s {
                return arg_err("node_to_sample length differs from row count");
            }
            let n = map.iter().max().map_or(0, |m| m + 1);
            let mut g = vec![Vec::new(); n];
            for (r, &k) in map.iter().enumerate() {
                g[k].push(r);
            }
            g
        }
    };
    let mut out = DenseMatrix::zeros(s, d);
    let mut buf = Vec::new();
    for rows in groups.iter().filter(|g| !g.is_empty()) {
        let inv = 1.0 / rows.len() as f64;
        for c in 0..d {
            buf.clear();
            buf.extend(rows.iter().map(|&r| x.get(r, c)));
            let center = mean_scale[c] * ordered_sum(&mut buf) * inv;
            buf.clear();
            buf.extend(rows.iter().map(|&r| (x.get(r, c) - center).powi(2)));
            let std = (ordered_sum(&mut buf) * inv).sqrt().max(STD_FLOOR);
            for &r in rows {
                out.set(r, c, scale[c] * (x.get(r, c) - center) / std + shift[c]);
            }
        }
    }
    Ok(out)
}
