use super::matrix::DenseMatrix;
use crate::error::{arg_err, Result};
use crate::hierarchy::HierarchicalPartition;
use crate::util::ordered_sum;

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    /// Weighted term of each level `1..=I`.
    pub terms: Vec<f64>,
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - m).exp());
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// Labeled point histogram of every level-`i` component.
pub fn label_histograms(hp: &HierarchicalPartition, labels: &[i32], level: usize, classes: usize) -> Result<Vec<Vec<usize>>> {
    if labels.len() != hp.point_count() {
        return arg_err("labels do not cover the points");
    }
    let mut hist = vec![vec![0usize; classes]; hp.size(level)];
    for (&c, &l) in hp.point_to_level(level).iter().zip(labels) {
        if l < 0 {
            continue;
        }
        if l as usize >= classes {
            return arg_err(format!("label {l} outside {classes} classes"));
        }
        hist[c][l as usize] += 1;
    }
    Ok(hist)
}

/// Cross-entropy supervision of every level.
///
/// Level 1 targets each superpoint's most frequent label (ties to the
/// smallest id); levels above target the label distribution, weighted by
/// `mu[i - 2]`. Each superpoint counts in proportion to its labeled points
/// over all labeled points; fully unlabeled superpoints are skipped.
pub fn hierarchical_loss(
    logits: &[DenseMatrix],
    hp: &HierarchicalPartition,
    labels: &[i32],
    mu: &[f64],
) -> Result<LossReport> {
    let top = hp.level_count();
    if logits.len() != top {
        return arg_err(format!("{} logit tables for {top} levels", logits.len()));
    }
    if mu.len() + 1 < top {
        return arg_err(format!("{} mu weights for {top} levels", mu.len()));
    }
    let classes = logits[0].cols();
    let labeled = labels.iter().filter(|&&l| l >= 0).count();
    let mut terms = Vec::with_capacity(top);
    for i in 1..=top {
        let z = &logits[i - 1];
        if z.shape() != (hp.size(i), classes) {
            return arg_err(format!("level {i} logits have shape {:?}", z.shape()));
        }
        let hist = label_histograms(hp, labels, i, classes)?;
        let probs = softmax_rows(z);
        let weight = if i == 1 { 1.0 } else { mu[i - 2] };
        let mut contrib = Vec::with_capacity(hist.len());
        for (p, h) in hist.iter().enumerate() {
            let n: usize = h.iter().sum();
            if n == 0 {
                continue;
            }
            let prob = probs.row(p);
            let ce = if i == 1 {
                let best = (0..classes).fold(0, |b, k| if h[k] > h[b] { k } else { b });
                -prob[best].max(LOG_FLOOR).ln()
            } else {
                -(0..classes).map(|k| h[k] as f64 / n as f64 * prob[k].max(LOG_FLOOR).ln()).sum::<f64>()
            };
            contrib.push(weight * n as f64 / labeled as f64 * ce);
        }
        terms.push(ordered_sum(&mut contrib));
    }
    let total = terms.iter().sum();
    Ok(LossReport { total, terms })
}
