use std::path::PathBuf;

use hiergen::classifiers::{ClassifierKind, ClassifierSpec};
use hiergen::data::{load_table, stratified_folds, Dataset, LoadOptions};
use hiergen::eval::{build_hierarchy, prepare, run_folds, CvConfig, HierarchyConfig};
use hiergen::hierarchy::export_newick;

fn glass() -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/glass.csv");
    load_table(path, &LoadOptions::default()).unwrap()
}

#[test]
fn loads_six_classes() {
    let ds = glass();
    assert_eq!((ds.n_rows(), ds.n_features(), ds.n_classes()), (214, 9, 6));
    assert_eq!(ds.class_counts(), vec![70, 76, 17, 13, 9, 29]);
}

#[test]
fn folds_are_balanced_per_class() {
    let ds = glass();
    let plan = stratified_folds(&ds, 5, 0).unwrap();
    for (k, &n) in ds.class_counts().iter().enumerate() {
        let mut per_fold = [0usize; 5];
        for (i, &f) in plan.assignments.iter().enumerate() {
            if ds.labels()[i] == k {
                per_fold[f] += 1;
            }
        }
        // Spread as evenly as possible: every fold gets floor or ceil of n/5.
        assert!(per_fold.iter().all(|&m| m == n / 5 || m == n.div_ceil(5)), "class {k}: {per_fold:?}");
    }
    let sizes: Vec<usize> = (0..5).map(|f| plan.test_indices(f).len()).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");
}

#[test]
fn full_data_hierarchy() {
    let ds = glass();
    let h = build_hierarchy(ds.features().view(), ds.labels(), 6, &HierarchyConfig::default()).unwrap();
    assert_eq!(h.tree.node_count(), 11);
    assert_eq!(h.lda_components, Some(3));
    let again = build_hierarchy(ds.features().view(), ds.labels(), 6, &HierarchyConfig::default()).unwrap();
    assert_eq!(export_newick(&h.tree, ds.class_names()), export_newick(&again.tree, ds.class_names()));
}

#[test]
fn test_rows_do_not_reach_the_hierarchy() {
    let cfg = CvConfig::new(ClassifierSpec::new(ClassifierKind::GaussianNb, 0));
    let (shuffled, plan) = prepare(&cfg, &glass()).unwrap();
    let base = run_folds(&cfg, &shuffled, &plan).unwrap();

    // Scramble the features of fold 0's test rows only.
    let mut x = shuffled.features().clone();
    for (j, &i) in plan.test_indices(0).iter().enumerate() {
        x.row_mut(i).mapv_inplace(|v| v * (3.0 + j as f64) + 100.0);
    }
    let tampered = Dataset::new(x, shuffled.labels().to_vec(), shuffled.class_names().to_vec(), false).unwrap();
    let after = run_folds(&cfg, &tampered, &plan).unwrap();
    assert_eq!(base.folds[0].tree_fingerprint, after.folds[0].tree_fingerprint);
    assert_eq!(base.folds[0].lda_components, after.folds[0].lda_components);
    // The other folds train on those rows, so at least one of them notices.
    assert!(base.folds[1..].iter().zip(&after.folds[1..]).any(|(a, b)| a.schemes != b.schemes));
}
