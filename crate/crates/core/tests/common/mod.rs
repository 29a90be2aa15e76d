// Shared helpers for the integration tests.
#![allow(dead_code)]

use hiergen::classifiers::ProbaModel;
use hiergen::hierarchy::{HierarchyTree, Shape};
use ndarray::{Array2, ArrayView2, Axis};
use proptest::prelude::*;

/// Splits `classes` (already in the desired leaf order) by the given cut
/// fractions, consumed in pre-order.
pub fn shape_from_cuts(classes: &[usize], cuts: &mut impl Iterator<Item = f64>) -> Shape {
    if classes.len() == 1 {
        return Shape::Leaf(classes[0]);
    }
    let f = cuts.next().unwrap_or(0.5);
    let cut = 1 + ((classes.len() - 1) as f64 * f).floor().min((classes.len() - 2) as f64) as usize;
    let left = shape_from_cuts(&classes[..cut], cuts);
    let right = shape_from_cuts(&classes[cut..], cuts);
    Shape::split(left, right)
}

/// Random tree over `2..=max_c` classes.
pub fn arb_tree(max_c: usize) -> impl Strategy<Value = HierarchyTree> {
    (2..=max_c)
        .prop_flat_map(|c| {
            (
                Just((0..c).collect::<Vec<_>>()).prop_shuffle(),
                proptest::collection::vec(0.0..1.0f64, c),
            )
        })
        .prop_map(|(classes, cuts)| {
            let shape = shape_from_cuts(&classes, &mut cuts.into_iter());
            HierarchyTree::from_shape(&shape).unwrap()
        })
}

/// Probability rows looked up by the first feature, which holds the row id.
#[derive(Clone)]
pub struct Table(pub Array2<f64>);

impl ProbaModel for Table {
    fn n_classes(&self) -> usize {
        self.0.ncols()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> hiergen::Result<Array2<f64>> {
        let rows: Vec<usize> = x.column(0).iter().map(|&v| v as usize).collect();
        Ok(self.0.select(Axis(0), &rows))
    }
}

pub fn row_ids(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 1), |(i, _)| i as f64)
}
