//! Self-checks of the kernel on generated data, used by `kernel-check`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_backward, attention_forward, AttentionInput, AttentionShape};
use super::augment::{sample_count, superpoint_dropout};
use super::loss::hierarchical_loss;
use super::matrix::DenseMatrix;
use super::network::{forward_full, init_params, relative_positions, KernelConfig, KernelInput, ModelShape};
use super::norm::graph_norm;
use crate::error::Result;
use crate::hierarchy::HierarchicalPartition;
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::spgraph::{SpGraphConfig, SuperpointGraph};
use crate::synthetic::{room_scene, SceneConfig};
use crate::Vec3;

/// Owned random attention problem.
#[derive(Debug, Clone)]
pub struct AttentionInstance {
    pub shape: AttentionShape,
    pub k: DenseMatrix,
    pub q: DenseMatrix,
    pub v: DenseMatrix,
    pub a_key: DenseMatrix,
    pub a_que: DenseMatrix,
    pub a_val: DenseMatrix,
    pub edges: Vec<(usize, usize)>,
}

impl AttentionInstance {
    /// Random directed graph without self-loops where every node has at
    /// least one neighbor; entries uniform in `[-1, 1]`.
    pub fn random(rng: &mut ChaCha8Rng, nodes: usize, shape: AttentionShape, edge_prob: f64) -> Self {
        let mut edges = Vec::new();
        for p in 0..nodes {
            let mut any = false;
            for q in 0..nodes {
                if p != q && rng.gen::<f64>() < edge_prob {
                    edges.push((p, q));
                    any = true;
                }
            }
            if !any && nodes > 1 {
                let q = (p + 1 + rng.gen_range(0..nodes - 1)) % nodes;
                edges.push((p, q));
            }
        }
        edges.shuffle(rng);
        let mut m = |r: usize, c: usize| {
            DenseMatrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let kw = shape.heads * shape.d_key;
        let vw = shape.heads * shape.d_val;
        let e = edges.len();
        AttentionInstance {
            shape,
            k: m(nodes, kw),
            q: m(nodes, kw),
            v: m(nodes, vw),
            a_key: m(e, kw),
            a_que: m(e, kw),
            a_val: m(e, vw),
            edges,
        }
    }

    pub fn input(&self) -> AttentionInput<'_> {
        AttentionInput {
            k: &self.k,
            q: &self.q,
            v: &self.v,
            a_key: &self.a_key,
            a_que: &self.a_que,
            a_val: &self.a_val,
            edges: &self.edges,
        }
    }

    fn tensors_mut(&mut self) -> [&mut DenseMatrix; 6] {
        [&mut self.k, &mut self.q, &mut self.v, &mut self.a_key, &mut self.a_que, &mut self.a_val]
    }
}

/// Straightforward loop evaluation of the attention output.
pub fn dense_attention(inst: &AttentionInstance) -> DenseMatrix {
    let s = inst.k.rows();
    let AttentionShape { heads, d_key, d_val } = inst.shape;
    let mut out = DenseMatrix::zeros(s, heads * d_val);
    for p in 0..s {
        let nbrs: Vec<usize> = (0..inst.edges.len()).filter(|&e| inst.edges[e].0 == p).collect();
        if nbrs.is_empty() {
            continue;
        }
        for h in 0..heads {
            let mut scores = Vec::new();
            for &e in &nbrs {
                let q = inst.edges[e].1;
                let mut s = 0.0;
                for d in h * d_key..(h + 1) * d_key {
                    s += (inst.q.get(p, d) + inst.a_que.get(e, d)) * (inst.k.get(q, d) + inst.a_key.get(e, d));
                }
                scores.push(s / (nbrs.len() as f64).sqrt());
            }
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for (i, &e) in nbrs.iter().enumerate() {
                let q = inst.edges[e].1;
                let w = scores[i].exp() / z;
                for d in h * d_val..(h + 1) * d_val {
                    out.set(p, d, out.get(p, d) + w * (inst.v.get(q, d) + inst.a_val.get(e, d)));
                }
            }
        }
    }
    out
}

/// Largest relative deviation between analytic gradients and central
/// differences of `Σ grad_out ⊙ out`, with relative error
/// `|a − n| / max(|a|, |n|, 1e-3)`.
pub fn gradient_check(inst: &AttentionInstance, grad_out: &DenseMatrix, h: f64) -> Result<f64> {
    let objective = |inst: &AttentionInstance| -> Result<f64> {
        let (out, _) = attention_forward(&inst.input(), inst.shape, false)?;
        Ok(out.data().iter().zip(grad_out.data()).map(|(a, b)| a * b).sum())
    };
    let (_, cache) = attention_forward(&inst.input(), inst.shape, false)?;
    let g = attention_backward(&inst.input(), inst.shape, &cache, grad_out)?;
    let analytic = [g.k, g.q, g.v, g.a_key, g.a_que, g.a_val];
    let mut work = inst.clone();
    let mut worst = 0.0f64;
    for (t, grad) in analytic.iter().enumerate() {
        for j in 0..grad.data().len() {
            let orig = work.tensors_mut()[t].data()[j];
            work.tensors_mut()[t].data_mut()[j] = orig + h;
            let plus = objective(&work)?;
            work.tensors_mut()[t].data_mut()[j] = orig - h;
            let minus = objective(&work)?;
            work.tensors_mut()[t].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
        }
    }
    Ok(worst)
}

/// Voxelized synthetic room with a two-level hierarchy and its graphs.
#[derive(Debug, Clone)]
pub struct ToyScene {
    pub positions: Vec<Vec3>,
    pub labels: Vec<i32>,
    pub point_features: DenseMatrix,
    pub hierarchy: HierarchicalPartition,
    pub graphs: Vec<SuperpointGraph>,
    pub scene_center: Vec3,
}

impl ToyScene {
    pub fn generate(seed: u64) -> Result<Self> {
        let cloud = room_scene(&SceneConfig { points: 6_000, boxes: 3, pillars: 1, balls: 2, ..SceneConfig::with_points(0, seed) });
        let voxel = 0.2;
        let cfg = PipelineConfig {
            voxel,
            lambdas: vec![0.05, 0.5],
            graph: SpGraphConfig::for_voxel(voxel),
            ..Default::default()
        };
        let out = run_pipeline(&cloud, &cfg)?;
        let dim = out.signal_dim;
        let point_features = DenseMatrix::from_vec(out.cloud.len(), dim, out.signal.clone())?;
        let scene_center = crate::util::mean_point(&out.cloud.positions);
        Ok(ToyScene {
            labels: out.cloud.labels.clone().unwrap_or_else(|| vec![-1; out.cloud.len()]),
            positions: out.cloud.positions,
            point_features,
            hierarchy: out.hierarchy,
            graphs: out.graphs,
            scene_center,
        })
    }

    pub fn input(&self) -> KernelInput<'_> {
        KernelInput {
            positions: &self.positions,
            point_features: &self.point_features,
            hierarchy: &self.hierarchy,
            graphs: &self.graphs,
            scene_center: self.scene_center,
        }
    }

    pub fn model_shape(&self, num_classes: usize) -> ModelShape {
        ModelShape {
            point_feature_dim: self.point_features.cols(),
            num_classes,
            level_count: self.hierarchy.level_count(),
        }
    }

    /// Same scene with the superpoints of every level renamed at random.
    /// Returns the permutations, `perms[i - 1]` for level `i`.
    pub fn relabeled(&self, rng: &mut ChaCha8Rng) -> Result<(ToyScene, Vec<Vec<usize>>)> {
        let mut out = self.clone();
        let mut perms = Vec::new();
        for i in 1..=self.hierarchy.level_count() {
            let mut perm: Vec<usize> = (0..self.hierarchy.size(i)).collect();
            perm.shuffle(rng);
            out.hierarchy = out.hierarchy.relabel(i, &perm)?;
            out.graphs[i - 1] = out.graphs[i - 1].relabel(&perm)?;
            perms.push(perm);
        }
        Ok((out, perms))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check { name, passed, detail });
    }
}

/// Runs the invariant and gradient suite of the kernel.
pub fn kernel_check(seed: u64, nano: bool) -> Result<CheckReport> {
    let mut rng = crate::util::rng(seed);
    let mut report = CheckReport::default();

    let (mut oracle_err, mut grad_err, mut sum_err) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..20 {
        let shape = AttentionShape { heads: 1 + t % 3, d_key: 2, d_val: 2 };
        let inst = AttentionInstance::random(&mut rng, 6 + t % 5, shape, 0.35);
        let (out, cache) = attention_forward(&inst.input(), shape, true)?;
        oracle_err = oracle_err.max(out.max_abs_diff(&dense_attention(&inst)));
        let s = inst.k.rows();
        for p in 0..s {
            for h in 0..shape.heads {
                let total: f64 = cache.incoming(p).iter().map(|&e| cache.weights.get(e, h)).sum();
                sum_err = sum_err.max((total - 1.0).abs());
            }
        }
        let g = DenseMatrix::from_vec(s, out.cols(), (0..s * out.cols()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        grad_err = grad_err.max(gradient_check(&inst, &g, 1e-5)?);
    }
    report.push("attention matches loop evaluation", oracle_err <= 1e-12, format!("max abs diff {oracle_err:.3e}"));
    report.push("softmax weights sum to one", sum_err <= 1e-12, format!("max deviation {sum_err:.3e}"));
    report.push("attention gradients match finite differences", grad_err <= 1e-4, format!("max rel err {grad_err:.3e}"));

    let x = DenseMatrix::from_vec(2, 1, vec![0.0, 2.0])?;
    let y = graph_norm(&x, None, &[1.0], &[0.0], &[1.0])?;
    report.push("graph norm of [0, 2] is [-1, 1]", y.data() == [-1.0, 1.0], format!("{:?}", y.data()));

    report.push("sample count for 128 points is 97", sample_count(128, 32, 128) == 97, String::new());

    let scene = ToyScene::generate(seed)?;
    let hp = &scene.hierarchy;
    let rel = relative_positions(hp, &scene.positions, scene.scene_center)?;
    let mut rel_err = 0.0f64;
    for (i, x) in rel.iter().enumerate() {
        let groups: Vec<usize> =
            if i < hp.level_count() { hp.level(i + 1).super_index.clone() } else { vec![0; x.rows()] };
        let mut max = vec![0.0f64; groups.iter().max().map_or(0, |m| m + 1)];
        for (r, &g) in groups.iter().enumerate() {
            max[g] = max[g].max(crate::util::norm(&[x.get(r, 0), x.get(r, 1), x.get(r, 2)]));
        }
        for m in max {
            if m > 0.0 {
                rel_err = rel_err.max((m - 1.0).abs());
            }
        }
    }
    report.push("relative positions have unit radius", rel_err <= 1e-9, format!("max deviation {rel_err:.3e}"));

    let view = superpoint_dropout(hp, 0.2, seed)?;
    let mut subtree_ok = true;
    for i in 0..hp.level_count() {
        let parent = &hp.level(i + 1).super_index;
        for (e, &k) in view.kept[i].iter().enumerate() {
            subtree_ok &= !k || view.kept[i + 1][parent[e]];
        }
    }
    subtree_ok &= view.kept.iter().all(|l| l.iter().any(|&k| k));
    report.push("dropout removes whole subtrees", subtree_ok, String::new());

    let classes = scene.labels.iter().copied().max().unwrap_or(0).max(0) as usize + 1;
    let cfg = KernelConfig { nano_mode: nano, ..KernelConfig::tiny(seed) };
    let params = init_params(&cfg, scene.model_shape(classes))?;
    let out = forward_full(&scene.input(), &params, &cfg)?;
    let shapes_ok = (1..=hp.level_count()).all(|i| out.logits[i - 1].shape() == (hp.size(i), classes))
        && out.logits.iter().all(DenseMatrix::is_finite);
    report.push("logit shapes and finiteness", shapes_ok, String::new());

    let (perm_scene, perms) = scene.relabeled(&mut rng)?;
    let out_p = forward_full(&perm_scene.input(), &params, &cfg)?;
    let mut equivariant = true;
    for (i, perm) in perms.iter().enumerate() {
        for (c, &t) in perm.iter().enumerate() {
            equivariant &= out.logits[i].row(c) == out_p.logits[i].row(t);
        }
    }
    report.push("forward pass is equivariant to relabeling", equivariant, String::new());

    let loss = hierarchical_loss(&out.logits, hp, &scene.labels, &cfg.mu_weights)?;
    report.push("loss is finite and nonnegative", loss.total.is_finite() && loss.total >= 0.0, format!("{:.6}", loss.total));

    Ok(report)
}
