//! CART classification tree with Gini impurity.
//!
//! Thresholds sit at midpoints between consecutive distinct sorted
//! values. Among equally good splits the lower feature index wins, then
//! the lower threshold. Leaves store class frequencies with add-one
//! smoothing, so no leaf ever assigns probability zero.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Fit on the rows listed in `samples` (repeats allowed, as produced by
    /// bootstrapping). `rng` is only consulted when `max_features` limits
    /// the candidate features.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        samples: &[usize],
        n_classes: usize,
        params: TreeParams,
        rng: &mut SeededRng,
    ) -> DecisionTree {
        let mut b = Builder {
            x,
            y,
            n_classes,
            params,
            nodes: Vec::new(),
        };
        let mut samples = samples.to_vec();
        b.grow(&mut samples, 0, rng);
        DecisionTree {
            nodes: b.nodes,
            n_classes,
        }
    }

    pub fn leaf_proba(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { proba } => return proba,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

fn gini_weighted(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    t - sum_sq / t
}

impl Builder<'_> {
    fn leaf(&mut self, counts: &[usize], total: usize) -> usize {
        let denom = (total + self.n_classes) as f64;
        let proba = counts.iter().map(|&c| (c as f64 + 1.0) / denom).collect();
        self.nodes.push(TreeNode::Leaf { proba });
        self.nodes.len() - 1
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize, rng: &mut SeededRng) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in samples.iter() {
            counts[self.y[i]] += 1;
        }
        let total = samples.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || total < self.params.min_samples_split {
            return self.leaf(&counts, total);
        }
        let Some((feature, threshold)) = self.best_split(samples, &counts, rng) else {
            return self.leaf(&counts, total);
        };

        let x = self.x;
        let mut split_at = 0;
        for k in 0..samples.len() {
            if x[[samples[k], feature]] <= threshold {
                samples.swap(split_at, k);
                split_at += 1;
            }
        }
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { proba: Vec::new() });
        let (l, r) = samples.split_at_mut(split_at);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[slot] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn candidate_features(&self, samples: &[usize], rng: &mut SeededRng) -> Vec<usize> {
        let m = self.x.ncols();
        let Some(limit) = self.params.max_features.filter(|&k| k < m) else {
            return (0..m).collect();
        };
        // Draw features in random order until `limit` non-constant ones are
        // found; constant features do not count against the budget.
        let order = rng.sample_indices(m, m);
        let mut chosen = Vec::with_capacity(limit);
        for f in order {
            let first = self.x[[samples[0], f]];
            if samples.iter().any(|&i| self.x[[i, f]] != first) {
                chosen.push(f);
                if chosen.len() == limit {
                    break;
                }
            }
        }
        chosen.sort_unstable();
        chosen
    }

    fn best_split(
        &self,
        samples: &[usize],
        counts: &[usize],
        rng: &mut SeededRng,
    ) -> Option<(usize, f64)> {
        let total = samples.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = samples.to_vec();
        for feature in self.candidate_features(samples, rng) {
            let x = self.x;
            sorted.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            for k in 0..total - 1 {
                left[self.y[sorted[k]]] += 1;
                let (lo, hi) = (x[[sorted[k], feature]], x[[sorted[k + 1], feature]]);
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || total - n_left < min_leaf {
                    continue;
                }
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let score = gini_weighted(&left, n_left) + gini_weighted(&right, total - n_left);
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separable_data_fits_exactly() {
        let x = array![[0.0, 5.0], [1.0, 3.0], [2.0, 4.0], [3.0, 1.0], [4.0, 0.0], [5.0, 2.0]];
        let y = [0, 1, 0, 2, 1, 2];
        let all: Vec<usize> = (0..6).collect();
        let t = DecisionTree::fit(x.view(), &y, &all, 3, TreeParams::default(), &mut SeededRng::new(0));
        for (i, row) in x.outer_iter().enumerate() {
            let p = t.leaf_proba(row.as_slice().unwrap());
            let arg = (0..3).max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a))).unwrap();
            assert_eq!(arg, y[i]);
        }
    }

    #[test]
    fn leaves_are_smoothed() {
        let x = array![[0.0], [1.0]];
        let t = DecisionTree::fit(x.view(), &[0, 1], &[0, 1], 2, TreeParams::default(), &mut SeededRng::new(0));
        assert_eq!(t.leaf_proba(&[0.0]), &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 0.5),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn tie_prefers_lower_feature() {
        // Both features separate the classes perfectly.
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let t = DecisionTree::fit(x.view(), &[0, 1], &[0, 1], 2, TreeParams::default(), &mut SeededRng::new(0));
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn depth_limit() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let params = TreeParams {
            max_depth: Some(1),
            ..Default::default()
        };
        let t = DecisionTree::fit(x.view(), &[0, 1, 0, 1], &[0, 1, 2, 3], 2, params, &mut SeededRng::new(0));
        assert!(t.depth() <= 1);
    }
}
