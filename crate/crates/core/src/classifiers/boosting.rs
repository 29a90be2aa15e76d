//! Multinomial gradient-boosted regression trees.
//!
//! Each round fits one second-order regression tree per class to the
//! softmax cross-entropy gradients (g = p − y, h = p(1 − p)). Split gain and
//! leaf weights follow the usual regularised form G²/(H + λ) and
//! −G/(H + λ). Scores start at zero, so an untrained model is uniform.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::softmax_rows;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 6,
            reg_lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    fn value(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                RegNode::Leaf { value } => return *value,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoost {
    /// `rounds[r][k]` is the tree for class `k` in round `r`, already
    /// scaled by the learning rate.
    pub rounds: Vec<Vec<RegTree>>,
    pub n_classes: usize,
}

impl GradientBoost {
    pub fn fit(x: ArrayView2<f64>, y: &[usize], n_classes: usize, params: &BoostParams) -> GradientBoost {
        let n = x.nrows();
        let mut scores = Array2::<f64>::zeros((n, n_classes));
        let mut rounds = Vec::with_capacity(params.n_estimators);
        let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
        for _ in 0..params.n_estimators {
            let proba = softmax_rows(scores.clone());
            let mut trees = Vec::with_capacity(n_classes);
            for k in 0..n_classes {
                let grad: Vec<f64> = (0..n)
                    .map(|i| proba[[i, k]] - if y[i] == k { 1.0 } else { 0.0 })
                    .collect();
                let hess: Vec<f64> = (0..n)
                    .map(|i| (proba[[i, k]] * (1.0 - proba[[i, k]])).max(1e-16))
                    .collect();
                let mut b = RegBuilder {
                    x,
                    grad: &grad,
                    hess: &hess,
                    params,
                    nodes: Vec::new(),
                };
                let mut idx: Vec<usize> = (0..n).collect();
                b.grow(&mut idx, 0);
                let tree = RegTree { nodes: b.nodes };
                trees.push(tree);
            }
            for (i, row) in rows.iter().enumerate() {
                for (k, tree) in trees.iter().enumerate() {
                    scores[[i, k]] += tree.value(row);
                }
            }
            rounds.push(trees);
        }
        GradientBoost { rounds, n_classes }
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut scores = Array2::zeros((x.nrows(), self.n_classes));
        for (mut dst, row) in scores.outer_iter_mut().zip(x.outer_iter()) {
            let row = row.to_vec();
            for trees in &self.rounds {
                for (k, tree) in trees.iter().enumerate() {
                    dst[k] += tree.value(&row);
                }
            }
        }
        softmax_rows(scores)
    }
}

struct RegBuilder<'a> {
    x: ArrayView2<'a, f64>,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostParams,
    nodes: Vec<RegNode>,
}

impl RegBuilder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let lambda = self.params.reg_lambda;
        let split = if depth < self.params.max_depth {
            self.best_split(idx, g, h)
        } else {
            None
        };
        let Some((feature, threshold)) = split else {
            let value = self.params.learning_rate * (-g / (h + lambda));
            self.nodes.push(RegNode::Leaf { value });
            return self.nodes.len() - 1;
        };
        let mut at = 0;
        for k in 0..idx.len() {
            if self.x[[idx[k], feature]] <= threshold {
                idx.swap(at, k);
                at += 1;
            }
        }
        let slot = self.nodes.len();
        self.nodes.push(RegNode::Leaf { value: 0.0 });
        let (l, r) = idx.split_at_mut(at);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    fn best_split(&self, idx: &[usize], g: f64, h: f64) -> Option<(usize, f64)> {
        let lambda = self.params.reg_lambda;
        let min_w = self.params.min_child_weight;
        let parent = g * g / (h + lambda);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for feature in 0..self.x.ncols() {
            let x = self.x;
            sorted.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..sorted.len().saturating_sub(1) {
                gl += self.grad[sorted[k]];
                hl += self.hess[sorted[k]];
                let (lo, hi) = (x[[sorted[k], feature]], x[[sorted[k + 1], feature]]);
                if lo == hi {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < min_w || hr < min_w {
                    continue;
                }
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
