//! Metrics and the cross-validation harness.
//!
//! Every fold builds its own hierarchy from the training split: optional
//! LDA projection, class means, then the configured clustering. The flat
//! baseline always runs so Learning Efficiency (hierarchical macro-F1 over
//! flat macro-F1) can be reported for every hierarchical scheme.
//!
//! Wall-clock times are kept out of the serialized report so that reruns
//! produce identical bytes; they are available separately.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::ops::AddAssign;
use std::str::FromStr;
use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierSpec;
use crate::data::{self, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::hierarchy::{self, export_newick, tree_fingerprint, HierarchyTree, Linkage};
use crate::reduce;
use crate::schemes::{train_scheme, SchemeKind};

/// Unweighted mean of per-class F1 over every label that occurs in either
/// sequence. A class that is predicted but never true (or the reverse)
/// scores 0.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("macro-F1 of no predictions".into()));
    }
    let labels: BTreeSet<usize> = y_true.iter().chain(y_pred).copied().collect();
    let mut total = 0.0;
    for &c in &labels {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(total / labels.len() as f64)
}

pub fn learning_efficiency(f1_hc: f64, f1_fc: f64) -> Result<f64> {
    if !(f1_fc > 0.0) {
        return Err(Error::UndefinedLearningEfficiency);
    }
    Ok(f1_hc / f1_fc)
}

/// Classifier work done by one scheme. `wall_seconds` is not serialized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostCounters {
    pub n_fits: usize,
    pub n_predict_calls: usize,
    pub n_rows_scored: usize,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, o: CostCounters) {
        self.n_fits += o.n_fits;
        self.n_predict_calls += o.n_predict_calls;
        self.n_rows_scored += o.n_rows_scored;
        self.wall_seconds += o.wall_seconds;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyMethod {
    #[default]
    Divisive,
    Agglomerative,
}

impl FromStr for HierarchyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "divisive" => Ok(HierarchyMethod::Divisive),
            "agglomerative" => Ok(HierarchyMethod::Agglomerative),
            _ => Err(Error::InvalidArgument(format!("unknown hierarchy method `{s}`"))),
        }
    }
}

impl fmt::Display for HierarchyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HierarchyMethod::Divisive => "divisive",
            HierarchyMethod::Agglomerative => "agglomerative",
        })
    }
}

/// How a hierarchy is induced from a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub method: HierarchyMethod,
    /// Used by the agglomerative method only.
    pub linkage: Linkage,
    /// Cumulative explained-variance threshold for the LDA projection
    /// applied before computing class means; `None` skips the projection.
    pub reduce_threshold: Option<f64>,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            method: HierarchyMethod::Divisive,
            linkage: Linkage::Single,
            reduce_threshold: Some(reduce::DEFAULT_VARIANCE_THRESHOLD),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub seed: u64,
    pub folds: usize,
    pub hierarchy: HierarchyConfig,
    /// Schemes to evaluate; `fc` is added when missing.
    pub schemes: Vec<SchemeKind>,
    pub classifier: ClassifierSpec,
}

impl CvConfig {
    pub fn new(classifier: ClassifierSpec) -> Self {
        CvConfig {
            seed: 0,
            folds: 5,
            hierarchy: HierarchyConfig::default(),
            schemes: SchemeKind::ALL.to_vec(),
            classifier,
        }
    }

    /// Requested schemes in canonical order, `fc` first.
    pub fn scheme_order(&self) -> Vec<SchemeKind> {
        let wanted: BTreeSet<SchemeKind> = self.schemes.iter().copied().chain([SchemeKind::Fc]).collect();
        wanted.into_iter().collect()
    }
}

/// A hierarchy built from one training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldHierarchy {
    pub tree: HierarchyTree,
    /// LDA components kept, when the projection is enabled.
    pub lda_components: Option<usize>,
}

/// Build the hierarchy for rows `x` with labels `y`.
pub fn build_hierarchy(x: ArrayView2<f64>, y: &[usize], n_classes: usize, cfg: &HierarchyConfig) -> Result<FoldHierarchy> {
    let (points, lda_components) = match cfg.reduce_threshold {
        Some(threshold) => {
            let projection = reduce::fit_lda_auto(x, y, threshold)?;
            let k = projection.output_dim;
            (reduce::transform(&projection, x)?, Some(k))
        }
        None => (x.to_owned(), None),
    };
    let means = hierarchy::class_conditional_means(points.view(), y, n_classes)?;
    let tree = match cfg.method {
        HierarchyMethod::Divisive => hierarchy::build_divisive(&means)?,
        HierarchyMethod::Agglomerative => hierarchy::build_agglomerative(&means, cfg.linkage)?,
    };
    Ok(FoldHierarchy { tree, lda_components })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeFold {
    pub macro_f1: f64,
    pub counters: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Absent when only the flat baseline ran.
    pub newick: Option<String>,
    pub tree_fingerprint: Option<String>,
    pub lda_components: Option<usize>,
    pub schemes: BTreeMap<SchemeKind, SchemeFold>,
    #[serde(skip)]
    pub hierarchy_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: SchemeKind,
    pub mean_macro_f1: f64,
    pub fold_macro_f1: Vec<f64>,
    /// Mean macro-F1 over the flat baseline's; `None` for `fc` itself and
    /// when the baseline scored zero.
    pub learning_efficiency: Option<f64>,
    /// Per-fold ratios, for inspecting spread.
    pub fold_learning_efficiency: Option<Vec<Option<f64>>>,
    pub counters: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: CvConfig,
    pub n_rows: usize,
    pub class_names: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub summary: Vec<SchemeSummary>,
}

/// Shuffle once with the config seed, then assign stratified folds.
pub fn prepare(cfg: &CvConfig, ds: &Dataset) -> Result<(Dataset, FoldPlan)> {
    let shuffled = data::shuffle(ds, cfg.seed);
    let plan = data::stratified_folds(&shuffled, cfg.folds, cfg.seed)?;
    Ok((shuffled, plan))
}

pub fn run_cv(cfg: &CvConfig, ds: &Dataset) -> Result<EvalReport> {
    let (shuffled, plan) = prepare(cfg, ds)?;
    run_folds(cfg, &shuffled, &plan)
}

/// Evaluate every fold of `plan` over `ds` (already shuffled). Folds run
/// in parallel and are merged in fold order.
pub fn run_folds(cfg: &CvConfig, ds: &Dataset, plan: &FoldPlan) -> Result<EvalReport> {
    cfg.classifier.validate()?;
    let folds: Vec<FoldResult> = (0..plan.k)
        .into_par_iter()
        .map(|fold| run_fold(cfg, ds, plan, fold).map_err(|e| e.in_fold(fold)))
        .collect::<Result<_>>()?;
    let summary = summarize(&cfg.scheme_order(), &folds);
    Ok(EvalReport {
        config: cfg.clone(),
        n_rows: ds.n_rows(),
        class_names: ds.class_names().to_vec(),
        folds,
        summary,
    })
}

fn run_fold(cfg: &CvConfig, ds: &Dataset, plan: &FoldPlan, fold: usize) -> Result<FoldResult> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let (x_train, y_train) = ds.take(&train_idx);
    let (x_test, y_test) = ds.take(&test_idx);
    let c = ds.n_classes();
    let order = cfg.scheme_order();

    let mut hierarchy_seconds = 0.0;
    let built = if order.iter().any(|k| k.uses_tree()) {
        let start = Instant::now();
        let h = build_hierarchy(x_train.view(), &y_train, c, &cfg.hierarchy)?;
        hierarchy_seconds = start.elapsed().as_secs_f64();
        Some(h)
    } else {
        None
    };
    let tree = built.as_ref().map(|h| &h.tree);

    let mut schemes = BTreeMap::new();
    for kind in order {
        let start = Instant::now();
        let model = train_scheme(kind, tree, &cfg.classifier, x_train.view(), &y_train, c)?;
        let pred = model.predict(x_test.view())?;
        let mut wall = start.elapsed().as_secs_f64();
        if kind.uses_tree() {
            wall += hierarchy_seconds;
        }
        schemes.insert(
            kind,
            SchemeFold {
                macro_f1: macro_f1(&y_test, &pred.labels)?,
                counters: CostCounters {
                    n_fits: model.n_fits,
                    n_predict_calls: pred.predict_calls,
                    n_rows_scored: pred.rows_scored,
                    wall_seconds: wall,
                },
            },
        );
    }
    let newick = tree.map(|t| export_newick(t, ds.class_names()));
    Ok(FoldResult {
        fold,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        tree_fingerprint: newick.as_deref().map(tree_fingerprint),
        newick,
        lda_components: built.as_ref().and_then(|h| h.lda_components),
        schemes,
        hierarchy_seconds,
    })
}

fn summarize(order: &[SchemeKind], folds: &[FoldResult]) -> Vec<SchemeSummary> {
    let fold_f1 = |kind: SchemeKind| -> Vec<f64> { folds.iter().map(|f| f.schemes[&kind].macro_f1).collect() };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let fc_folds = fold_f1(SchemeKind::Fc);
    let fc_mean = mean(&fc_folds);
    order
        .iter()
        .map(|&kind| {
            let per_fold = fold_f1(kind);
            let mean_f1 = mean(&per_fold);
            let mut counters = CostCounters::default();
            for f in folds {
                counters += f.schemes[&kind].counters;
            }
            let hc = kind != SchemeKind::Fc;
            SchemeSummary {
                scheme: kind,
                mean_macro_f1: mean_f1,
                learning_efficiency: hc.then(|| learning_efficiency(mean_f1, fc_mean).ok()).flatten(),
                fold_learning_efficiency: hc.then(|| {
                    per_fold
                        .iter()
                        .zip(&fc_folds)
                        .map(|(&h, &f)| learning_efficiency(h, f).ok())
                        .collect()
                }),
                fold_macro_f1: per_fold,
                counters,
            }
        })
        .collect()
}

/// Wall-clock seconds, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    /// Summed over folds, per scheme; hierarchy time is included for
    /// every scheme that uses the tree.
    pub schemes: BTreeMap<SchemeKind, f64>,
    pub fold_hierarchy_seconds: Vec<f64>,
}

impl EvalReport {
    pub fn scheme(&self, kind: SchemeKind) -> Option<&SchemeSummary> {
        self.summary.iter().find(|s| s.scheme == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn timings(&self) -> Timings {
        Timings {
            schemes: self
                .summary
                .iter()
                .map(|s| (s.scheme, s.counters.wall_seconds))
                .collect(),
            fold_hierarchy_seconds: self.folds.iter().map(|f| f.hierarchy_seconds).collect(),
        }
    }

    /// One row per scheme and fold, then one `mean` row per scheme.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::InvalidArgument(format!("csv output: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scheme",
            "fold",
            "macro_f1",
            "learning_efficiency",
            "n_fits",
            "n_predict_calls",
            "n_rows_scored",
            "tree_fingerprint",
        ])
        .map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.summary {
            for (i, f) in self.folds.iter().enumerate() {
                let r = &f.schemes[&s.scheme];
                let le = s.fold_learning_efficiency.as_ref().and_then(|v| v[i]);
                let fp = if s.scheme.uses_tree() { f.tree_fingerprint.clone().unwrap_or_default() } else { String::new() };
                w.write_record([
                    s.scheme.to_string(),
                    f.fold.to_string(),
                    r.macro_f1.to_string(),
                    opt(le),
                    r.counters.n_fits.to_string(),
                    r.counters.n_predict_calls.to_string(),
                    r.counters.n_rows_scored.to_string(),
                    fp,
                ])
                .map_err(err)?;
            }
        }
        for s in &self.summary {
            w.write_record([
                s.scheme.to_string(),
                "mean".to_string(),
                s.mean_macro_f1.to_string(),
                opt(s.learning_efficiency),
                s.counters.n_fits.to_string(),
                s.counters.n_predict_calls.to_string(),
                s.counters.n_rows_scored.to_string(),
                String::new(),
            ])
            .map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(format!("csv output: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierKind;
    use crate::rng::SeededRng;
    use ndarray::Array2;

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        let got = macro_f1(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 2, 0]).unwrap();
        assert!((got - (0.5 + 0.8 + 2.0 / 3.0) / 3.0).abs() < 1e-15);
        assert_eq!(macro_f1(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert!(macro_f1(&[], &[]).is_err());
        assert!(macro_f1(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn le_arithmetic() {
        assert!((learning_efficiency(0.55, 0.5).unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(learning_efficiency(0.7, 0.7).unwrap(), 1.0);
        assert!(matches!(learning_efficiency(0.3, 0.0), Err(Error::UndefinedLearningEfficiency)));
    }

    fn blobs(c: usize, per: usize) -> Dataset {
        let mut rng = SeededRng::new(21);
        let y: Vec<usize> = (0..c * per).map(|i| i % c).collect();
        let x = Array2::from_shape_fn((y.len(), 3), |(i, j)| {
            let k = y[i] as f64;
            [k, (k * 1.7).sin() * 3.0, (k * 0.3).cos() * 2.0][j] + 0.6 * rng.unit()
        });
        let names = (0..c).map(|k| format!("k{k}")).collect();
        Dataset::new(x, y, names, false).unwrap()
    }

    #[test]
    fn report_is_consistent() {
        let ds = blobs(5, 20);
        let cfg = CvConfig::new(ClassifierSpec::new(ClassifierKind::GaussianNb, 0));
        let r = run_cv(&cfg, &ds).unwrap();
        assert_eq!(r.folds.len(), 5);
        let fc = r.scheme(SchemeKind::Fc).unwrap().mean_macro_f1;
        for s in &r.summary[1..] {
            assert_eq!(s.learning_efficiency.unwrap(), s.mean_macro_f1 / fc);
        }
        assert_eq!(r.summary[0].scheme, SchemeKind::Fc);
        assert!(r.folds.iter().all(|f| f.tree_fingerprint.is_some() && f.lda_components.is_some()));
        let again = run_cv(&cfg, &ds).unwrap();
        assert_eq!(r.to_json().unwrap(), again.to_json().unwrap());
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 5 * 5 + 5);
    }

    #[test]
    fn fc_only_skips_hierarchy() {
        let ds = blobs(3, 10);
        let mut cfg = CvConfig::new(ClassifierSpec::new(ClassifierKind::GaussianNb, 0));
        cfg.schemes = vec![];
        let r = run_cv(&cfg, &ds).unwrap();
        assert_eq!(r.summary.len(), 1);
        assert!(r.folds.iter().all(|f| f.newick.is_none()));
    }

    #[test]
    fn too_many_folds() {
        let ds = blobs(3, 10);
        let mut cfg = CvConfig::new(ClassifierSpec::new(ClassifierKind::GaussianNb, 0));
        cfg.folds = 40;
        assert!(matches!(run_cv(&cfg, &ds), Err(Error::Stratification(_))));
    }
}
