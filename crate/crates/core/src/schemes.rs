//! Flat and hierarchical prediction schemes over a binary class tree.
//!
//! * `fc`: one flat multi-class classifier.
//! * `global`: one flat classifier whose class posteriors are summed up the
//!   tree; a leaf scores the product of the node masses on its path.
//! * `lcpn`: a binary classifier per internal node; each instance is routed
//!   from the root to a single leaf.
//! * `lcpn_plus`: the same classifiers, but every leaf scores the product
//!   of the branch probabilities along its path and the best leaf wins.
//! * `lcpn_plus_f`: like `lcpn_plus` except that the last factor of every
//!   path comes from a flat classifier. Nodes whose children are both leaves
//!   would only ever supply that last factor, so they get no classifier.
//!
//! Binary classifiers predict column 0 for the left subtree and column 1
//! for the right one. Ties go to the lower class id, or to the left child.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierSpec, ProbaModel, TrainedClassifier};
use crate::error::{Error, Result};
use crate::hierarchy::{path_of, HierarchyTree, NodePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Fc,
    Global,
    Lcpn,
    LcpnPlus,
    LcpnPlusF,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Fc,
        SchemeKind::Global,
        SchemeKind::Lcpn,
        SchemeKind::LcpnPlus,
        SchemeKind::LcpnPlusF,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Fc => "fc",
            SchemeKind::Global => "global",
            SchemeKind::Lcpn => "lcpn",
            SchemeKind::LcpnPlus => "lcpn_plus",
            SchemeKind::LcpnPlusF => "lcpn_plus_f",
        }
    }

    pub fn uses_tree(self) -> bool {
        self != SchemeKind::Fc
    }

    fn uses_flat(self) -> bool {
        matches!(self, SchemeKind::Fc | SchemeKind::Global | SchemeKind::LcpnPlusF)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}`")))
    }
}

/// Internal nodes that get their own classifier under `kind`.
pub fn active_parents(kind: SchemeKind, tree: &HierarchyTree) -> Vec<usize> {
    match kind {
        SchemeKind::Fc | SchemeKind::Global => Vec::new(),
        SchemeKind::Lcpn | SchemeKind::LcpnPlus => tree.internal_nodes(),
        SchemeKind::LcpnPlusF => tree
            .internal_nodes()
            .into_iter()
            .filter(|&i| !tree.has_only_leaf_children(i))
            .collect(),
    }
}

/// Trained classifiers for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeModel<C = TrainedClassifier> {
    pub kind: SchemeKind,
    pub tree: Option<HierarchyTree>,
    pub flat: Option<C>,
    /// Binary classifiers keyed by internal node index.
    pub parents: BTreeMap<usize, C>,
    pub n_classes: usize,
    /// Classifier fits performed during training.
    pub n_fits: usize,
}

/// Labels plus whatever the scheme produces alongside them, and how much
/// classifier work it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// Per-leaf scores; absent for `lcpn`, which only follows one path.
    pub scores: Option<Array2<f64>>,
    /// Visited nodes per instance, root first; only for `lcpn`.
    pub traces: Option<Vec<Vec<usize>>>,
    pub predict_calls: usize,
    pub rows_scored: usize,
}

/// Rows of `x`, labels and binary targets for the classifier at `node`:
/// instances whose class lies under `node`, target 0 for the left subtree.
pub fn parent_training_set(
    tree: &HierarchyTree,
    node: usize,
    x: ArrayView2<f64>,
    y: &[usize],
) -> Result<(Array2<f64>, Vec<usize>)> {
    let [left, right] = tree
        .children(node)
        .ok_or_else(|| Error::InvalidArgument(format!("node {node} is a leaf")))?;
    let mut side = vec![None; tree.n_classes()];
    for c in tree.classes_under(left) {
        side[c] = Some(0);
    }
    for c in tree.classes_under(right) {
        side[c] = Some(1);
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, &label) in y.iter().enumerate() {
        if let Some(t) = side[label] {
            rows.push(i);
            targets.push(t);
        }
    }
    for (t, name) in [(0, left), (1, right)] {
        if !targets.contains(&t) {
            return Err(Error::UnsatisfiableTraining(format!(
                "node {node} has no training rows under child {name}"
            )));
        }
    }
    Ok((x.select(Axis(0), &rows), targets))
}

/// Fit every classifier `kind` needs. Hierarchical classifiers share `spec`
/// with the flat one.
pub fn train_scheme(
    kind: SchemeKind,
    tree: Option<&HierarchyTree>,
    spec: &ClassifierSpec,
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
) -> Result<SchemeModel> {
    let tree = match (kind.uses_tree(), tree) {
        (true, None) => return Err(Error::MissingClassifier(format!("scheme {kind} needs a tree"))),
        (true, Some(t)) if t.n_classes() != n_classes => {
            return Err(Error::InvalidArgument(format!(
                "tree has {} leaves but the data has {n_classes} classes",
                t.n_classes()
            )))
        }
        (true, Some(t)) => Some(t.clone()),
        (false, _) => None,
    };
    let flat = if kind.uses_flat() {
        Some(classifiers::fit(spec, x, y, n_classes)?)
    } else {
        None
    };
    let mut parents = BTreeMap::new();
    if let Some(t) = &tree {
        let fitted: Vec<(usize, TrainedClassifier)> = active_parents(kind, t)
            .into_par_iter()
            .map(|node| {
                let (xs, ys) = parent_training_set(t, node, x, y)?;
                Ok((node, classifiers::fit(spec, xs.view(), &ys, 2)?))
            })
            .collect::<Result<_>>()?;
        parents.extend(fitted);
    }
    let n_fits = parents.len() + usize::from(flat.is_some());
    Ok(SchemeModel {
        kind,
        tree,
        flat,
        parents,
        n_classes,
        n_fits,
    })
}

/// Row-wise argmax; ties go to the lowest column.
pub fn argmax_rows(scores: ArrayView2<f64>) -> Vec<usize> {
    scores
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn all_paths(tree: &HierarchyTree) -> Vec<NodePath> {
    (0..tree.n_classes())
        .map(|c| path_of(tree, c).expect("class in range"))
        .collect()
}

/// Path-product scores: each leaf multiplies, over every step of its path,
/// the parent's probability of the branch taken. `branch[i]` holds the
/// n×2 output of node `i`'s classifier.
pub fn path_product_scores(tree: &HierarchyTree, branch: &BTreeMap<usize, Array2<f64>>, n: usize) -> Result<Array2<f64>> {
    let mut scores = Array2::ones((n, tree.n_classes()));
    for path in all_paths(tree) {
        for step in &path.steps {
            let p = lookup(branch, step.parent)?;
            let col = p.column(step.position as usize);
            scores.column_mut(path.leaf_class).zip_mut_with(&col, |s, &v| *s *= v);
        }
    }
    Ok(scores)
}

/// Hybrid scores: the flat probability of the leaf times the branch
/// probabilities of every step above the leaf.
pub fn hybrid_scores(tree: &HierarchyTree, flat: ArrayView2<f64>, branch: &BTreeMap<usize, Array2<f64>>) -> Result<Array2<f64>> {
    check_width(flat, tree.n_classes())?;
    let mut scores = flat.to_owned();
    for path in all_paths(tree) {
        for step in path.non_terminal() {
            let p = lookup(branch, step.parent)?;
            let col = p.column(step.position as usize);
            scores.column_mut(path.leaf_class).zip_mut_with(&col, |s, &v| *s *= v);
        }
    }
    Ok(scores)
}

/// Global scores: node masses are sums of flat leaf probabilities below
/// each node; a leaf scores the product of masses on its path, root
/// excluded and leaf included.
pub fn aggregated_scores(tree: &HierarchyTree, flat: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_width(flat, tree.n_classes())?;
    let n = flat.nrows();
    let mut mass = Array2::<f64>::zeros((n, tree.node_count()));
    for node in 0..tree.node_count() {
        for c in tree.classes_under(node) {
            let col = flat.column(c);
            mass.column_mut(node).zip_mut_with(&col, |m, &v| *m += v);
        }
    }
    let mut scores = Array2::ones((n, tree.n_classes()));
    for path in all_paths(tree) {
        for step in &path.steps {
            let col = mass.column(step.node);
            scores.column_mut(path.leaf_class).zip_mut_with(&col, |s, &v| *s *= v);
        }
    }
    Ok(scores)
}

/// Walk from the root, asking `p_right(node)` at each internal node and
/// taking the right child only when it is strictly more likely. Returns
/// the reached class and the visited nodes.
pub fn route<F>(tree: &HierarchyTree, mut p_right: F) -> Result<(usize, Vec<usize>)>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut node = 0;
    let mut trace = vec![0];
    while let Some([left, right]) = tree.children(node) {
        node = if p_right(node)? > 0.5 { right } else { left };
        trace.push(node);
    }
    let class = tree.node(node).leaf_class.expect("leaf has a class");
    Ok((class, trace))
}

fn lookup(branch: &BTreeMap<usize, Array2<f64>>, node: usize) -> Result<&Array2<f64>> {
    branch
        .get(&node)
        .ok_or_else(|| Error::MissingClassifier(format!("no classifier at node {node}")))
}

fn check_width(m: ArrayView2<f64>, c: usize) -> Result<()> {
    if m.ncols() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: m.ncols(),
        });
    }
    Ok(())
}

impl<C: ProbaModel + Sync> SchemeModel<C> {
    /// Assemble a model from already trained parts, checking that exactly
    /// the classifiers `kind` needs are present.
    pub fn from_parts(
        kind: SchemeKind,
        tree: Option<HierarchyTree>,
        flat: Option<C>,
        parents: BTreeMap<usize, C>,
        n_classes: usize,
    ) -> Result<Self> {
        if kind.uses_tree() != tree.is_some() {
            return Err(Error::InvalidArgument(format!(
                "scheme {kind} {} a tree",
                if kind.uses_tree() { "needs" } else { "takes no" }
            )));
        }
        if kind.uses_flat() != flat.is_some() {
            return Err(Error::MissingClassifier(format!(
                "scheme {kind} {} a flat classifier",
                if kind.uses_flat() { "needs" } else { "takes no" }
            )));
        }
        if let Some(f) = &flat {
            if f.n_classes() != n_classes {
                return Err(Error::InvalidArgument("flat classifier arity differs from class count".into()));
            }
        }
        let wanted = tree.as_ref().map(|t| active_parents(kind, t)).unwrap_or_default();
        let have: Vec<usize> = parents.keys().copied().collect();
        if wanted != have {
            return Err(Error::MissingClassifier(format!(
                "scheme {kind} needs classifiers at nodes {wanted:?}, got {have:?}"
            )));
        }
        if parents.values().any(|p| p.n_classes() != 2) {
            return Err(Error::InvalidArgument("hierarchical classifiers must be binary".into()));
        }
        if let Some(t) = &tree {
            if t.n_classes() != n_classes {
                return Err(Error::InvalidArgument("tree leaves differ from class count".into()));
            }
        }
        let n_fits = parents.len() + usize::from(flat.is_some());
        Ok(SchemeModel {
            kind,
            tree,
            flat,
            parents,
            n_classes,
            n_fits,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        match self.kind {
            SchemeKind::Fc => self.predict_flat(x),
            SchemeKind::Global => self.predict_global(x),
            SchemeKind::Lcpn => self.predict_lcpn(x),
            SchemeKind::LcpnPlus => self.predict_lcpn_plus(x),
            SchemeKind::LcpnPlusF => self.predict_lcpn_plus_f(x),
        }
    }

    fn expect_kind(&self, kind: SchemeKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!(
                "model was trained for {}, not {kind}",
                self.kind
            )));
        }
        Ok(())
    }

    fn tree(&self) -> Result<&HierarchyTree> {
        self.tree
            .as_ref()
            .ok_or_else(|| Error::MissingClassifier(format!("scheme {} has no tree", self.kind)))
    }

    fn flat_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let flat = self
            .flat
            .as_ref()
            .ok_or_else(|| Error::MissingClassifier("flat classifier missing".into()))?;
        flat.predict_proba(x)
    }

    fn parent(&self, node: usize) -> Result<&C> {
        self.parents
            .get(&node)
            .ok_or_else(|| Error::MissingClassifier(format!("no classifier at node {node}")))
    }

    /// One batched call per active parent.
    fn branch_probabilities(&self, x: ArrayView2<f64>) -> Result<BTreeMap<usize, Array2<f64>>> {
        let nodes = active_parents(self.kind, self.tree()?);
        let out: Vec<(usize, Array2<f64>)> = nodes
            .par_iter()
            .map(|&node| Ok((node, self.parent(node)?.predict_proba(x)?)))
            .collect::<Result<_>>()?;
        Ok(out.into_iter().collect())
    }

    fn scored(scores: Array2<f64>, calls: usize, n: usize) -> Prediction {
        Prediction {
            labels: argmax_rows(scores.view()),
            scores: Some(scores),
            traces: None,
            predict_calls: calls,
            rows_scored: calls * n,
        }
    }

    pub fn predict_flat(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        self.expect_kind(SchemeKind::Fc)?;
        Ok(Self::scored(self.flat_proba(x)?, 1, x.nrows()))
    }

    pub fn predict_global(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        self.expect_kind(SchemeKind::Global)?;
        let flat = self.flat_proba(x)?;
        let scores = aggregated_scores(self.tree()?, flat.view())?;
        Ok(Self::scored(scores, 1, x.nrows()))
    }

    pub fn predict_lcpn_plus(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        self.expect_kind(SchemeKind::LcpnPlus)?;
        let branch = self.branch_probabilities(x)?;
        let scores = path_product_scores(self.tree()?, &branch, x.nrows())?;
        Ok(Self::scored(scores, branch.len(), x.nrows()))
    }

    pub fn predict_lcpn_plus_f(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        self.expect_kind(SchemeKind::LcpnPlusF)?;
        let flat = self.flat_proba(x)?;
        let branch = self.branch_probabilities(x)?;
        let scores = hybrid_scores(self.tree()?, flat.view(), &branch)?;
        Ok(Self::scored(scores, branch.len() + 1, x.nrows()))
    }

    /// Routes each instance separately, one single-row call per visited
    /// internal node.
    pub fn predict_lcpn(&self, x: ArrayView2<f64>) -> Result<Prediction> {
        self.expect_kind(SchemeKind::Lcpn)?;
        let tree = self.tree()?;
        let mut labels = Vec::with_capacity(x.nrows());
        let mut traces = Vec::with_capacity(x.nrows());
        let mut calls = 0;
        for i in 0..x.nrows() {
            let row = x.slice(ndarray::s![i..i + 1, ..]);
            let (label, trace) = route(tree, |node| {
                calls += 1;
                let p = self.parent(node)?.predict_proba(row)?;
                Ok(p[[0, 1]])
            })?;
            labels.push(label);
            traces.push(trace);
        }
        Ok(Prediction {
            labels,
            scores: None,
            traces: Some(traces),
            predict_calls: calls,
            rows_scored: calls,
        })
    }
}

/// CSV with one row per instance: id, one score column per class, label.
pub fn write_scores_csv<W: Write>(out: W, scores: ArrayView2<f64>, labels: &[usize], class_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["instance".to_string()];
    header.extend(class_names.iter().map(|n| format!("score_{n}")));
    header.push("predicted".into());
    w.write_record(&header).map_err(csv_err)?;
    for (i, (row, &label)) in scores.outer_iter().zip(labels).enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(class_names.get(label).cloned().unwrap_or_else(|| label.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv output: {e}")))?;
    Ok(())
}

/// CSV with one row per instance: id, visited nodes joined by `>`, label.
pub fn write_traces_csv<W: Write>(out: W, traces: &[Vec<usize>], labels: &[usize], class_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "path", "predicted"]).map_err(csv_err)?;
    for (i, (trace, &label)) in traces.iter().zip(labels).enumerate() {
        let path: Vec<String> = trace.iter().map(|n| n.to_string()).collect();
        let name = class_names.get(label).cloned().unwrap_or_else(|| label.to_string());
        w.write_record([i.to_string(), path.join(">"), name]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv output: {e}")))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv output: {e}"))
}
