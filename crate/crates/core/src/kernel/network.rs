//! Encoder/decoder dataflow over a hierarchical partition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_forward, AttentionInput, AttentionShape};
use super::matrix::DenseMatrix;
use super::norm::graph_norm;
use super::params::{check_positive, ParamBundle};
use crate::error::{arg_err, Result};
use crate::hierarchy::HierarchicalPartition;
use crate::spgraph::{SuperpointGraph, ADJACENCY_DIM};
use crate::Vec3;

const LEAKY_SLOPE: f64 = 0.01;
const POINT_HIDDEN: [usize; 2] = [32, 64];
const RADIUS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub d_point: usize,
    pub d_adj: usize,
    pub d_val: usize,
    /// Key width per head.
    pub d_key: usize,
    pub n_heads: usize,
    pub n_blocks_enc: usize,
    pub n_blocks_dec: usize,
    /// `μ²…μᴵ`.
    pub mu_weights: Vec<f64>,
    pub dropout_p: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Skip the point encoder and embed level 1 from mean point features.
    pub nano_mode: bool,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            d_point: 128,
            d_adj: 32,
            d_val: 64,
            d_key: 4,
            n_heads: 16,
            n_blocks_enc: 3,
            n_blocks_dec: 1,
            mu_weights: vec![50.0],
            dropout_p: 0.2,
            n_min: 32,
            n_max: 128,
            nano_mode: false,
            seed: 0,
        }
    }
}

impl KernelConfig {
    /// A small configuration suited to tests and diagnostics.
    pub fn tiny(seed: u64) -> Self {
        KernelConfig { d_point: 8, d_adj: 4, d_val: 8, d_key: 2, n_heads: 2, n_blocks_enc: 2, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_point", self.d_point),
            ("d_adj", self.d_adj),
            ("d_val", self.d_val),
            ("d_key", self.d_key),
            ("n_heads", self.n_heads),
            ("n_min", self.n_min),
        ] {
            check_positive(name, v)?;
        }
        if self.d_val % self.n_heads != 0 {
            return arg_err(format!("d_val {} is not divisible by {} heads", self.d_val, self.n_heads));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return arg_err("dropout_p must lie in [0, 1)");
        }
        if self.n_max < self.n_min {
            return arg_err("n_max must be at least n_min");
        }
        if self.mu_weights.iter().any(|&m| !(m >= 0.0)) {
            return arg_err("mu weights must be nonnegative");
        }
        Ok(())
    }

    pub fn attention_shape(&self) -> AttentionShape {
        AttentionShape { heads: self.n_heads, d_key: self.d_key, d_val: self.d_val / self.n_heads }
    }
}

/// Data-dependent sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub point_feature_dim: usize,
    pub num_classes: usize,
    pub level_count: usize,
}

fn tensor_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a, so every tensor's draw depends only on its name
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn add_linear(p: &mut ParamBundle, seed: u64, name: String, rows: usize, cols: usize) {
    let mut rng = tensor_rng(seed, &name);
    p.init_uniform(name, rows, cols, rows, &mut rng);
}

fn add_norm(p: &mut ParamBundle, prefix: &str, d: usize) {
    p.init_const(format!("{prefix}.scale"), d, 1.0);
    p.init_const(format!("{prefix}.shift"), d, 0.0);
    p.init_const(format!("{prefix}.mean_scale"), d, 1.0);
}

fn add_mlp(p: &mut ParamBundle, seed: u64, prefix: &str, dims: &[usize]) {
    for (j, w) in dims.windows(2).enumerate() {
        add_linear(p, seed, format!("{prefix}.l{j}.w"), w[0], w[1]);
        let b = format!("{prefix}.l{j}.b");
        let mut rng = tensor_rng(seed, &b);
        p.init_uniform(b, 1, w[1], w[0], &mut rng);
        if j + 2 < dims.len() {
            add_norm(p, &format!("{prefix}.l{j}.norm"), w[1]);
        }
    }
}

fn add_stage(p: &mut ParamBundle, cfg: &KernelConfig, prefix: &str, in_dim: usize, blocks: usize) {
    let (dv, da) = (cfg.d_val, cfg.d_adj);
    let kw = cfg.n_heads * cfg.d_key;
    add_mlp(p, cfg.seed, &format!("{prefix}.mlp"), &[in_dim, dv, dv]);
    add_mlp(p, cfg.seed, &format!("{prefix}.adj"), &[ADJACENCY_DIM, da, da, 3 * da]);
    for b in 0..blocks {
        let bp = format!("{prefix}.block{b}");
        add_norm(p, &format!("{bp}.norm"), dv);
        add_linear(p, cfg.seed, format!("{bp}.wk"), dv, kw);
        add_linear(p, cfg.seed, format!("{bp}.wq"), dv, kw);
        add_linear(p, cfg.seed, format!("{bp}.wv"), dv, dv);
        add_linear(p, cfg.seed, format!("{bp}.ak"), da, kw);
        add_linear(p, cfg.seed, format!("{bp}.aq"), da, kw);
        add_linear(p, cfg.seed, format!("{bp}.av"), da, dv);
    }
}

/// Deterministic initialization of every tensor from `config.seed`.
pub fn init_params(config: &KernelConfig, shape: ModelShape) -> Result<ParamBundle> {
    config.validate()?;
    check_positive("level_count", shape.level_count)?;
    check_positive("num_classes", shape.num_classes)?;
    let mut p = ParamBundle::new();
    let hf = shape.point_feature_dim;
    let level1_in = if config.nano_mode {
        hf + 3
    } else {
        add_mlp(&mut p, config.seed, "point_enc", &[hf + 3, POINT_HIDDEN[0], POINT_HIDDEN[1], config.d_point]);
        config.d_point + 3
    };
    for i in 1..=shape.level_count {
        let in_dim = if i == 1 { level1_in } else { config.d_val + 3 };
        add_stage(&mut p, config, &format!("enc{i}"), in_dim, config.n_blocks_enc);
        if i < shape.level_count {
            add_stage(&mut p, config, &format!("dec{i}"), 2 * config.d_val + 3, config.n_blocks_dec);
        }
        add_linear(&mut p, config.seed, format!("cls{i}.w"), config.d_val, shape.num_classes);
        p.init_const(format!("cls{i}.b"), shape.num_classes, 0.0);
    }
    Ok(p)
}

fn norm_params<'a>(p: &'a ParamBundle, prefix: &str) -> Result<[&'a [f64]; 3]> {
    Ok([
        p.get(&format!("{prefix}.scale"))?.data(),
        p.get(&format!("{prefix}.shift"))?.data(),
        p.get(&format!("{prefix}.mean_scale"))?.data(),
    ])
}

/// Linear layers with GraphNorm and LeakyReLU between them.
pub fn mlp_forward(p: &ParamBundle, prefix: &str, x: &DenseMatrix) -> Result<DenseMatrix> {
    let mut x = x.clone();
    let mut j = 0;
    while p.contains(&format!("{prefix}.l{j}.w")) {
        x = x.affine(p.get(&format!("{prefix}.l{j}.w"))?, p.get(&format!("{prefix}.l{j}.b"))?)?;
        let norm = format!("{prefix}.l{j}.norm");
        if p.contains(&format!("{norm}.scale")) {
            let [s, t, m] = norm_params(p, &norm)?;
            x = graph_norm(&x, None, s, t, m)?.map(|v| if v >= 0.0 { v } else { LEAKY_SLOPE * v });
        }
        j += 1;
    }
    if j == 0 {
        return arg_err(format!("no layers under {prefix}"));
    }
    Ok(x)
}

/// Relative position of every element of every level `0..=I`.
///
/// Level `i < I` is taken relative to the parent centroid and level `I`
/// relative to `scene_center`; each sibling group is scaled so its largest
/// offset has norm 1.
pub fn relative_positions(hp: &HierarchicalPartition, positions: &[Vec3], scene_center: Vec3) -> Result<Vec<DenseMatrix>> {
    if positions.len() != hp.point_count() {
        return arg_err("positions do not match the hierarchy");
    }
    let top = hp.level_count();
    let mut out = Vec::with_capacity(top + 1);
    for i in 0..=top {
        let own: &[Vec3] = if i == 0 { positions } else { &hp.level(i).centroids };
        let (parent, parent_pos): (Vec<usize>, Vec<Vec3>) = if i < top {
            (hp.level(i + 1).super_index.clone(), hp.level(i + 1).centroids.clone())
        } else {
            (vec![0; own.len()], vec![scene_center])
        };
        let offsets: Vec<Vec3> =
            own.iter().zip(&parent).map(|(c, &q)| crate::util::sub(c, &parent_pos[q])).collect();
        let mut radius = vec![0.0f64; parent_pos.len()];
        for (o, &q) in offsets.iter().zip(&parent) {
            radius[q] = radius[q].max(crate::util::norm(o));
        }
        let mut m = DenseMatrix::zeros(own.len(), 3);
        for (r, (o, &q)) in offsets.iter().zip(&parent).enumerate() {
            if radius[q] >= RADIUS_FLOOR {
                for d in 0..3 {
                    m.set(r, d, o[d] / radius[q]);
                }
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Componentwise max of the children's rows for every level-`i` component.
pub fn maxpool_children(hp: &HierarchicalPartition, i: usize, child_features: &DenseMatrix) -> Result<DenseMatrix> {
    let l = hp.level(i);
    if child_features.rows() != l.element_count() {
        return arg_err(format!("{} child rows for {} elements", child_features.rows(), l.element_count()));
    }
    let mut out = DenseMatrix::from_vec(
        l.component_count(),
        child_features.cols(),
        vec![f64::NEG_INFINITY; l.component_count() * child_features.cols()],
    )?;
    for (e, &p) in l.super_index.iter().enumerate() {
        for (o, &v) in out.row_mut(p).iter_mut().zip(child_features.row(e)) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

/// `n_blocks` rounds of GraphNorm, K/Q/V projection, attention and residual.
pub fn transformer(
    p: &ParamBundle,
    cfg: &KernelConfig,
    prefix: &str,
    x: &DenseMatrix,
    graph: &SuperpointGraph,
) -> Result<DenseMatrix> {
    let shape = cfg.attention_shape();
    let edge_feats = DenseMatrix::from_vec(graph.edge_count(), ADJACENCY_DIM, graph.features.concat())?;
    let adj = if graph.edge_count() > 0 {
        mlp_forward(p, &format!("{prefix}.adj"), &edge_feats)?
    } else {
        DenseMatrix::zeros(0, 3 * cfg.d_adj)
    };
    let da = cfg.d_adj;
    let (adj_k, adj_q, adj_v) = (adj.columns(0, da), adj.columns(da, 2 * da), adj.columns(2 * da, 3 * da));
    let mut x = x.clone();
    let mut b = 0;
    while p.contains(&format!("{prefix}.block{b}.wk")) {
        let bp = format!("{prefix}.block{b}");
        let [s, t, m] = norm_params(p, &format!("{bp}.norm"))?;
        let xn = graph_norm(&x, None, s, t, m)?;
        let k = xn.matmul(p.get(&format!("{bp}.wk"))?)?;
        let q = xn.matmul(p.get(&format!("{bp}.wq"))?)?;
        let v = xn.matmul(p.get(&format!("{bp}.wv"))?)?;
        let a_key = adj_k.matmul(p.get(&format!("{bp}.ak"))?)?;
        let a_que = adj_q.matmul(p.get(&format!("{bp}.aq"))?)?;
        let a_val = adj_v.matmul(p.get(&format!("{bp}.av"))?)?;
        let input =
            AttentionInput { k: &k, q: &q, v: &v, a_key: &a_key, a_que: &a_que, a_val: &a_val, edges: &graph.edges };
        let (out, _) = attention_forward(&input, shape, false)?;
        x = x.add(&out)?;
        b += 1;
    }
    Ok(x)
}

fn check_graph(graph: &SuperpointGraph, nodes: usize) -> Result<()> {
    if graph.features.len() != graph.edge_count() {
        return arg_err("graph features do not match its edges");
    }
    if graph.edges.iter().any(|&(p, q)| p >= nodes || q >= nodes) {
        return arg_err(format!("level {} graph references a missing superpoint", graph.level));
    }
    Ok(())
}

/// `gᵢ = T_enc(φ_enc([xᵢ, pooled]))`.
pub fn encode_level(
    i: usize,
    pooled: &DenseMatrix,
    x: &DenseMatrix,
    graph: &SuperpointGraph,
    p: &ParamBundle,
    cfg: &KernelConfig,
) -> Result<DenseMatrix> {
    check_graph(graph, x.rows())?;
    let input = DenseMatrix::hconcat(&[x, pooled])?;
    let z = mlp_forward(p, &format!("enc{i}.mlp"), &input)?;
    transformer(p, cfg, &format!("enc{i}"), &z, graph)
}

/// `hᵢ = T_dec(φ_dec([xᵢ, gᵢ, h^{i+1}(parent)]))`.
#[allow(clippy::too_many_arguments)]
pub fn decode_level(
    i: usize,
    hp: &HierarchicalPartition,
    g: &DenseMatrix,
    h_parent: &DenseMatrix,
    x: &DenseMatrix,
    graph: &SuperpointGraph,
    p: &ParamBundle,
    cfg: &KernelConfig,
) -> Result<DenseMatrix> {
    check_graph(graph, x.rows())?;
    let up = h_parent.gather_rows(&hp.level(i + 1).super_index);
    let input = DenseMatrix::hconcat(&[x, g, &up])?;
    let z = mlp_forward(p, &format!("dec{i}.mlp"), &input)?;
    transformer(p, cfg, &format!("dec{i}"), &z, graph)
}

/// Everything the network reads.
#[derive(Debug, Clone, Copy)]
pub struct KernelInput<'a> {
    pub positions: &'a [Vec3],
    /// `N × point_feature_dim` handcrafted point features.
    pub point_features: &'a DenseMatrix,
    pub hierarchy: &'a HierarchicalPartition,
    /// One graph per level `1..=I`.
    pub graphs: &'a [SuperpointGraph],
    pub scene_center: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `logits[i - 1]` is `|Pᵢ| × K`.
    pub logits: Vec<DenseMatrix>,
    pub encoder: Vec<DenseMatrix>,
    pub decoder: Vec<DenseMatrix>,
}

/// Mean point feature of every level-1 superpoint.
pub fn aggregated_features(hp: &HierarchicalPartition, point_features: &DenseMatrix) -> DenseMatrix {
    let l = hp.level(1);
    let d = point_features.cols();
    let mut out = DenseMatrix::zeros(l.component_count(), d);
    for (pt, &c) in l.super_index.iter().enumerate() {
        for (o, &v) in out.row_mut(c).iter_mut().zip(point_features.row(pt)) {
            *o += v;
        }
    }
    for c in 0..l.component_count() {
        let inv = 1.0 / l.point_counts[c] as f64;
        out.row_mut(c).iter_mut().for_each(|v| *v *= inv);
    }
    out
}

pub fn forward_full(input: &KernelInput, p: &ParamBundle, cfg: &KernelConfig) -> Result<ForwardOutput> {
    cfg.validate()?;
    let hp = input.hierarchy;
    let top = hp.level_count();
    if top == 0 {
        return arg_err("the hierarchy has no levels");
    }
    if input.graphs.len() != top {
        return arg_err(format!("{} graphs for {top} levels", input.graphs.len()));
    }
    if input.point_features.rows() != hp.point_count() {
        return arg_err("point features do not match the hierarchy");
    }
    let x = relative_positions(hp, input.positions, input.scene_center)?;

    let level1_in = if cfg.nano_mode {
        aggregated_features(hp, input.point_features)
    } else {
        let pts = DenseMatrix::hconcat(&[&x[0], input.point_features])?;
        let g0 = mlp_forward(p, "point_enc", &pts)?;
        maxpool_children(hp, 1, &g0)?
    };
    let mut encoder: Vec<DenseMatrix> = Vec::with_capacity(top);
    for i in 1..=top {
        let pooled = if i == 1 { level1_in.clone() } else { maxpool_children(hp, i, &encoder[i - 2])? };
        encoder.push(encode_level(i, &pooled, &x[i], &input.graphs[i - 1], p, cfg)?);
    }
    let mut decoder = vec![DenseMatrix::default(); top];
    decoder[top - 1] = encoder[top - 1].clone();
    for i in (1..top).rev() {
        decoder[i - 1] =
            decode_level(i, hp, &encoder[i - 1], &decoder[i], &x[i], &input.graphs[i - 1], p, cfg)?;
    }
    let logits = (1..=top)
        .map(|i| decoder[i - 1].affine(p.get(&format!("cls{i}.w"))?, p.get(&format!("cls{i}.b"))?))
        .collect::<Result<_>>()?;
    Ok(ForwardOutput { logits, encoder, decoder })
}
