mod common;

use std::collections::BTreeMap;

use common::{arb_tree, row_ids, Table};
use hiergen::hierarchy::HierarchyTree;
use hiergen::schemes::{active_parents, SchemeKind, SchemeModel};
use ndarray::{s, Array2, Axis};
use proptest::prelude::*;

const N: usize = 24;

fn normalize(a: Array2<f64>) -> Array2<f64> {
    let sums = a.sum_axis(Axis(1)).insert_axis(Axis(1));
    &a / &sums
}

/// Probabilities kept away from 0.5 so routing never hits the tie rule.
fn binary_rows(raw: &[f64]) -> Array2<f64> {
    let p = Array2::from_shape_fn((N, 1), |(i, _)| {
        let v = raw[i % raw.len()];
        if v < 0.5 { 0.05 + 0.4 * v } else { 0.55 + 0.4 * v }
    });
    let mut out = Array2::zeros((N, 2));
    out.slice_mut(s![.., 1]).assign(&p.column(0));
    out.slice_mut(s![.., 0]).assign(&p.column(0).mapv(|v| 1.0 - v));
    out
}

fn model(kind: SchemeKind, tree: &HierarchyTree, flat: &Array2<f64>, branch: &BTreeMap<usize, Array2<f64>>) -> SchemeModel<Table> {
    let needed: Vec<usize> = active_parents(kind, tree);
    let parents = needed.iter().map(|&n| (n, Table(branch[&n].clone()))).collect();
    let flat = matches!(kind, SchemeKind::Global | SchemeKind::LcpnPlusF).then(|| Table(flat.clone()));
    SchemeModel::from_parts(kind, Some(tree.clone()), flat, parents, tree.n_classes()).unwrap()
}

fn inputs() -> impl Strategy<Value = (HierarchyTree, Array2<f64>, BTreeMap<usize, Array2<f64>>)> {
    arb_tree(10).prop_flat_map(|tree| {
        let c = tree.n_classes();
        let internal = tree.internal_nodes();
        (
            Just(tree),
            proptest::collection::vec(0.01..1.0f64, N * c),
            proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, N), internal.len()),
        )
            .prop_map(move |(tree, flat, raw)| {
                let flat = normalize(Array2::from_shape_vec((N, c), flat).unwrap());
                let branch = internal.iter().zip(&raw).map(|(&n, r)| (n, binary_rows(r))).collect();
                (tree, flat, branch)
            })
    })
}

const HIER: [SchemeKind; 4] = [SchemeKind::Global, SchemeKind::Lcpn, SchemeKind::LcpnPlus, SchemeKind::LcpnPlusF];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mirroring_the_tree_changes_nothing((tree, flat, branch) in inputs()) {
        let mirror = tree.mirrored();
        let swapped: BTreeMap<usize, Array2<f64>> = branch
            .iter()
            .map(|(&n, p)| (n, p.select(Axis(1), &[1, 0])))
            .collect();
        let x = row_ids(N);
        for kind in HIER {
            let a = model(kind, &tree, &flat, &branch).predict(x.view()).unwrap();
            let b = model(kind, &mirror, &flat, &swapped).predict(x.view()).unwrap();
            prop_assert_eq!(&a.labels, &b.labels, "{}", kind);
            if let (Some(sa), Some(sb)) = (a.scores, b.scores) {
                for (u, v) in sa.iter().zip(sb.iter()) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn lcpn_plus_rows_are_distributions((tree, flat, branch) in inputs()) {
        let p = model(SchemeKind::LcpnPlus, &tree, &flat, &branch).predict(row_ids(N).view()).unwrap();
        for row in p.scores.unwrap().outer_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn lcpn_trace_follows_the_more_likely_child((tree, flat, branch) in inputs()) {
        let p = model(SchemeKind::Lcpn, &tree, &flat, &branch).predict(row_ids(N).view()).unwrap();
        let traces = p.traces.unwrap();
        prop_assert_eq!(p.predict_calls, traces.iter().map(|t| t.len() - 1).sum::<usize>());
        for (i, trace) in traces.iter().enumerate() {
            prop_assert_eq!(trace[0], 0);
            for w in trace.windows(2) {
                let [l, r] = tree.children(w[0]).unwrap();
                let go_right = branch[&w[0]][[i, 1]] > 0.5;
                prop_assert_eq!(w[1], if go_right { r } else { l });
            }
            let last = *trace.last().unwrap();
            prop_assert_eq!(tree.node(last).leaf_class, Some(p.labels[i]));
        }
    }

    #[test]
    fn lcpn_plus_f_with_uninformative_parents_keeps_flat_order((tree, flat, _b) in inputs()) {
        // Every active parent says 50/50, so scores are the flat scores
        // scaled by a power of two that depends only on depth.
        let half = Array2::from_elem((N, 2), 0.5);
        let branch = tree.internal_nodes().into_iter().map(|n| (n, half.clone())).collect();
        let p = model(SchemeKind::LcpnPlusF, &tree, &flat, &branch).predict(row_ids(N).view()).unwrap();
        let scores = p.scores.unwrap();
        for k in 0..tree.n_classes() {
            let path = hiergen::hierarchy::path_of(&tree, k).unwrap();
            let factor = 0.5f64.powi(path.non_terminal().len() as i32);
            for i in 0..N {
                prop_assert!((scores[[i, k]] - flat[[i, k]] * factor).abs() <= 1e-15);
            }
        }
    }
}
