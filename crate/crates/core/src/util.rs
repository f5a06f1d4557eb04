use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Vec3;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let d = sub(a, b);
    dot(&d, &d)
}

pub(crate) fn mean_point<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Vec3 {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for p in pts {
        acc[0] += p[0];
        acc[1] += p[1];
        acc[2] += p[2];
        n += 1;
    }
    if n == 0 {
        return acc;
    }
    let inv = 1.0 / n as f64;
    [acc[0] * inv, acc[1] * inv, acc[2] * inv]
}

/// Sum that depends only on the multiset of values, not on their order.
pub(crate) fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    values.iter().sum()
}

/// Most frequent non-negative label, ties to the smallest id. `None` when no
/// label is `>= 0`.
pub(crate) fn majority_label(labels: impl IntoIterator<Item = i32>) -> Option<i32> {
    let mut counts: Vec<usize> = Vec::new();
    for l in labels {
        if l < 0 {
            continue;
        }
        let l = l as usize;
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    let mut best: Option<(usize, usize)> = None;
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((k, c));
        }
    }
    best.map(|(k, _)| k as i32)
}
