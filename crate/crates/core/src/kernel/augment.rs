//! Superpoint dropout and per-superpoint point sampling.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{arg_err, Result};
use crate::hierarchy::HierarchicalPartition;

/// Which elements survive at every level, `kept[0]` being the points.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutView {
    pub kept: Vec<Vec<bool>>,
}

impl DropoutView {
    pub fn survivors(&self, level: usize) -> usize {
        self.kept[level].iter().filter(|&&k| k).count()
    }
}

const MAX_ATTEMPTS: usize = 1000;

/// Drops every superpoint at every level independently with probability
/// `p_drop`, removing its whole subtree.
///
/// Draws again while some level would be left empty; after repeated
/// failures the identity view is returned.
pub fn superpoint_dropout(hp: &HierarchicalPartition, p_drop: f64, seed: u64) -> Result<DropoutView> {
    if !(0.0..1.0).contains(&p_drop) {
        return arg_err("dropout probability must lie in [0, 1)");
    }
    let top = hp.level_count();
    let mut rng = crate::util::rng(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut kept: Vec<Vec<bool>> = vec![Vec::new(); top + 1];
        kept[top] = (0..hp.size(top)).map(|_| rng.gen::<f64>() >= p_drop).collect();
        for i in (0..top).rev() {
            let parent = &hp.level(i + 1).super_index;
            let own: Vec<bool> = if i == 0 {
                vec![true; hp.point_count()]
            } else {
                (0..hp.size(i)).map(|_| rng.gen::<f64>() >= p_drop).collect()
            };
            kept[i] = own.iter().zip(parent).map(|(&k, &q)| k && kept[i + 1][q]).collect();
        }
        if kept.iter().all(|l| l.iter().any(|&k| k)) {
            return Ok(DropoutView { kept });
        }
    }
    Ok(DropoutView { kept: (0..=top).map(|i| vec![true; hp.size(i)]).collect() })
}

/// `max(n_min, round(n·tanh(n/n_max)))`, capped at `n`.
pub fn sample_count(n: usize, n_min: usize, n_max: usize) -> usize {
    let x = n as f64;
    let target = (x * (x / n_max as f64).tanh()).round() as usize;
    target.max(n_min).min(n)
}

/// Sorted point indices sampled without replacement from every level-1 superpoint.
pub fn sample_superpoint_points(
    hp: &HierarchicalPartition,
    n_min: usize,
    n_max: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_min == 0 || n_max < n_min {
        return arg_err("need 1 <= n_min <= n_max");
    }
    let mut rng = crate::util::rng(seed);
    Ok(hp
        .point_members(1)
        .into_iter()
        .map(|members| {
            let k = sample_count(members.len(), n_min, n_max);
            let mut picked: Vec<usize> = sample(&mut rng, members.len(), k).into_iter().map(|j| members[j]).collect();
            picked.sort_unstable();
            picked
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(sample_count(10, 32, 128), 10);
        assert_eq!(sample_count(128, 32, 128), 97);
        assert_eq!(sample_count(40, 32, 128), 32);
        let n = 100_000;
        assert_eq!(sample_count(n, 32, 128), n);
    }
}
