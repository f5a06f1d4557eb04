//! Superpoint attention with per-edge key, query and value offsets.

use super::matrix::DenseMatrix;
use crate::error::{arg_err, Result};
use crate::util::ordered_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionShape {
    pub heads: usize,
    /// Key/query width per head.
    pub d_key: usize,
    /// Value width per head.
    pub d_val: usize,
}

/// Node maps `K, Q` (`S × heads·d_key`), `V` (`S × heads·d_val`) and the
/// per-edge offsets for edges `(p, q)`: node `p` attends to neighbor `q`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionInput<'a> {
    pub k: &'a DenseMatrix,
    pub q: &'a DenseMatrix,
    pub v: &'a DenseMatrix,
    pub a_key: &'a DenseMatrix,
    pub a_que: &'a DenseMatrix,
    pub a_val: &'a DenseMatrix,
    pub edges: &'a [(usize, usize)],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionCache {
    /// Softmax weight of every edge, `E × heads`.
    pub weights: DenseMatrix,
    /// Edge ids grouped by receiving node.
    offsets: Vec<usize>,
    order: Vec<usize>,
}

impl AttentionCache {
    pub fn incoming(&self, p: usize) -> &[usize] {
        &self.order[self.offsets[p]..self.offsets[p + 1]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub k: DenseMatrix,
    pub q: DenseMatrix,
    pub v: DenseMatrix,
    pub a_key: DenseMatrix,
    pub a_que: DenseMatrix,
    pub a_val: DenseMatrix,
}

fn check(input: &AttentionInput, shape: AttentionShape) -> Result<usize> {
    let s = input.k.rows();
    let e = input.edges.len();
    let kw = shape.heads * shape.d_key;
    let vw = shape.heads * shape.d_val;
    let expect = [
        ("K", input.k, s, kw),
        ("Q", input.q, s, kw),
        ("V", input.v, s, vw),
        ("A_key", input.a_key, e, kw),
        ("A_que", input.a_que, e, kw),
        ("A_val", input.a_val, e, vw),
    ];
    for (name, m, r, c) in expect {
        if m.shape() != (r, c) {
            return arg_err(format!("{name} has shape {:?}, expected ({r}, {c})", m.shape()));
        }
    }
    if let Some(&(p, q)) = input.edges.iter().find(|(p, q)| *p >= s || *q >= s) {
        return arg_err(format!("edge ({p}, {q}) outside {s} nodes"));
    }
    Ok(s)
}

fn group_by_receiver(edges: &[(usize, usize)], s: usize) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; s + 1];
    for &(p, _) in edges {
        offsets[p + 1] += 1;
    }
    for i in 0..s {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut order = vec![0; edges.len()];
    for (e, &(p, _)) in edges.iter().enumerate() {
        order[fill[p]] = e;
        fill[p] += 1;
    }
    (offsets, order)
}

/// Multi-head attention output per node, without the residual.
///
/// Scores are scaled by `1/√|N(p)|` and normalized by a max-subtracted
/// softmax over the neighbors of `p`. Nodes without neighbors output zeros
/// unless `strict`, in which case they are an error. Sums run in a
/// value-sorted order so the result does not depend on edge order.
pub fn attention_forward(
    input: &AttentionInput,
    shape: AttentionShape,
    strict: bool,
) -> Result<(DenseMatrix, AttentionCache)> {
    let s = check(input, shape)?;
    let (offsets, order) = group_by_receiver(input.edges, s);
    let (h, dk, dv) = (shape.heads, shape.d_key, shape.d_val);
    let mut out = DenseMatrix::zeros(s, h * dv);
    let mut weights = DenseMatrix::zeros(input.edges.len(), h);
    let mut terms = Vec::new();
    let mut scores = Vec::new();
    for p in 0..s {
        let inc = &order[offsets[p]..offsets[p + 1]];
        if inc.is_empty() {
            if strict {
                return arg_err(format!("node {p} has no neighbors"));
            }
            continue;
        }
        let norm = 1.0 / (inc.len() as f64).sqrt();
        for head in 0..h {
            let ks = head * dk..(head + 1) * dk;
            scores.clear();
            for &e in inc {
                let q = input.edges[e].1;
                terms.clear();
                for d in ks.clone() {
                    let qe = input.q.get(p, d) + input.a_que.get(e, d);
                    let ke = input.k.get(q, d) + input.a_key.get(e, d);
                    terms.push(qe * ke);
                }
                scores.push(ordered_sum(&mut terms) * norm);
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut ex: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z = ordered_sum(&mut ex.clone());
            ex.iter_mut().for_each(|x| *x /= z);
            for (&e, &w) in inc.iter().zip(&ex) {
                weights.set(e, head, w);
            }
            for d in head * dv..(head + 1) * dv {
                terms.clear();
                for (&e, &w) in inc.iter().zip(&ex) {
                    let q = input.edges[e].1;
                    terms.push(w * (input.v.get(q, d) + input.a_val.get(e, d)));
                }
                out.set(p, d, ordered_sum(&mut terms));
            }
        }
    }
    Ok((out, AttentionCache { weights, offsets, order }))
}

/// Exact gradients of [`attention_forward`] given the output gradient.
pub fn attention_backward(
    input: &AttentionInput,
    shape: AttentionShape,
    cache: &AttentionCache,
    grad_out: &DenseMatrix,
) -> Result<AttentionGrads> {
    let s = check(input, shape)?;
    let (h, dk, dv) = (shape.heads, shape.d_key, shape.d_val);
    if grad_out.shape() != (s, h * dv) {
        return arg_err(format!("output gradient has shape {:?}", grad_out.shape()));
    }
    let e_count = input.edges.len();
    let mut g = AttentionGrads {
        k: DenseMatrix::zeros(s, h * dk),
        q: DenseMatrix::zeros(s, h * dk),
        v: DenseMatrix::zeros(s, h * dv),
        a_key: DenseMatrix::zeros(e_count, h * dk),
        a_que: DenseMatrix::zeros(e_count, h * dk),
        a_val: DenseMatrix::zeros(e_count, h * dv),
    };
    let mut gw = Vec::new();
    for p in 0..s {
        let inc = cache.incoming(p);
        if inc.is_empty() {
            continue;
        }
        let norm = 1.0 / (inc.len() as f64).sqrt();
        for head in 0..h {
            gw.clear();
            for &e in inc {
                let q = input.edges[e].1;
                let w = cache.weights.get(e, head);
                let mut dot = 0.0;
                for d in head * dv..(head + 1) * dv {
                    let go = grad_out.get(p, d);
                    let val = input.v.get(q, d) + input.a_val.get(e, d);
                    dot += go * val;
                    let gv = w * go;
                    g.a_val.set(e, d, gv);
                    g.v.set(q, d, g.v.get(q, d) + gv);
                }
                gw.push(dot);
            }
            let mean: f64 = inc.iter().zip(&gw).map(|(&e, &x)| cache.weights.get(e, head) * x).sum();
            for (&e, &x) in inc.iter().zip(&gw) {
                let q = input.edges[e].1;
                let gs = cache.weights.get(e, head) * (x - mean) * norm;
                for d in head * dk..(head + 1) * dk {
                    let qe = input.q.get(p, d) + input.a_que.get(e, d);
                    let ke = input.k.get(q, d) + input.a_key.get(e, d);
                    g.a_que.set(e, d, gs * ke);
                    g.q.set(p, d, g.q.get(p, d) + gs * ke);
                    g.a_key.set(e, d, gs * qe);
                    g.k.set(q, d, g.k.get(q, d) + gs * qe);
                }
            }
        }
    }
    Ok(g)
}
