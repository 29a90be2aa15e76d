use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

/// Bagged CART trees; probabilities are the mean of per-tree leaf
/// distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap sample and feature subsets from
    /// substream `t` of `seed`, so the result does not depend on how many
    /// threads build the forest.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> RandomForest {
        let n = x.nrows();
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = SeededRng::substream(seed, t as u64);
                let samples: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, &samples, n_classes, params.tree, &mut rng)
            })
            .collect();
        RandomForest { trees, n_classes }
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        mean_tree_proba(&self.trees, self.n_classes, x)
    }
}

pub(crate) fn mean_tree_proba(trees: &[DecisionTree], n_classes: usize, x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), n_classes));
    let inv = 1.0 / trees.len() as f64;
    for (mut dst, row) in out.outer_iter_mut().zip(x.outer_iter()) {
        let row = row.to_vec();
        for tree in trees {
            for (d, p) in dst.iter_mut().zip(tree.leaf_proba(&row)) {
                *d += p;
            }
        }
        dst.mapv_inplace(|v| v * inv);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0], [4.0, 4.0], [5.0, 3.0]];
        let y = [0, 0, 1, 1, 2, 2];
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: true,
            tree: TreeParams {
                max_features: Some(1),
                ..Default::default()
            },
        };
        let f = RandomForest::fit(x.view(), &y, 3, &params, 0);
        let p = f.predict_proba(x.view());
        for (i, row) in x.outer_iter().enumerate() {
            assert_eq!(p.row(i).to_vec(), f.trees[0].leaf_proba(row.as_slice().unwrap()));
        }
    }

    #[test]
    fn thread_count_independent() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64);
        let y: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let params = ForestParams {
            n_estimators: 16,
            bootstrap: true,
            tree: TreeParams {
                max_features: Some(2),
                ..Default::default()
            },
        };
        let a = RandomForest::fit(x.view(), &y, 3, &params, 9);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| RandomForest::fit(x.view(), &y, 3, &params, 9));
        assert_eq!(a, b);
    }
}
