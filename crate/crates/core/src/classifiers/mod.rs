//! Probabilistic base classifiers behind one fit / predict-probabilities
//! contract.

mod boosting;
mod forest;
mod lda;
mod naive_bayes;
mod tree;
mod ts_forest;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use boosting::{BoostParams, GradientBoost, RegNode, RegTree};
pub use forest::{ForestParams, RandomForest};
pub use lda::LdaClassifier;
pub use naive_bayes::GaussianNb;
pub use tree::{DecisionTree, TreeNode, TreeParams};
pub use ts_forest::{interval_stats, ts_interval_features, Interval, IntervalTree, TsForest, TsForestParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    GaussianNb,
    LdaClassifier,
    RandomForest,
    GradientBoost,
    TsForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::GaussianNb,
        ClassifierKind::LdaClassifier,
        ClassifierKind::RandomForest,
        ClassifierKind::GradientBoost,
        ClassifierKind::TsForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::LdaClassifier => "lda_classifier",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::GradientBoost => "gradient_boost",
            ClassifierKind::TsForest => "ts_forest",
        }
    }

    /// Hyperparameter keys accepted by this kind.
    pub fn param_keys(self) -> &'static [&'static str] {
        match self {
            ClassifierKind::GaussianNb => &["var_smoothing"],
            ClassifierKind::LdaClassifier => &["solver"],
            ClassifierKind::RandomForest => &[
                "n_estimators",
                "max_depth",
                "max_features",
                "min_samples_split",
                "min_samples_leaf",
                "bootstrap",
            ],
            ClassifierKind::GradientBoost => &[
                "n_estimators",
                "learning_rate",
                "max_depth",
                "reg_lambda",
                "min_child_weight",
            ],
            ClassifierKind::TsForest => &["n_estimators", "n_intervals", "min_interval", "max_depth"],
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown classifier kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Number(v as f64)
    }
}

impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Number(v as f64)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// A classifier kind, its hyperparameters, and the seed all randomness is
/// drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    pub seed: u64,
}

/// Hyperparameters after validation and defaulting.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Resolved {
    Nb { var_smoothing: f64 },
    Lda,
    Forest(ForestParams),
    Boost(BoostParams),
    Ts(TsForestParams),
}

/// `max_features` before the feature count is known.
#[derive(Debug, Clone, Copy, PartialEq)]
enum FeatureBudget {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl FeatureBudget {
    fn resolve(self, m: usize) -> Option<usize> {
        match self {
            FeatureBudget::Sqrt => Some(((m as f64).sqrt().floor() as usize).max(1)),
            FeatureBudget::Log2 => Some(((m as f64).log2().floor() as usize).max(1)),
            FeatureBudget::All => None,
            FeatureBudget::Count(k) => Some(k.min(m)),
        }
    }
}

struct ParamReader<'a> {
    spec: &'a ClassifierSpec,
}

impl ParamReader<'_> {
    fn invalid(key: &str, msg: impl Into<String>) -> Error {
        Error::InvalidParam {
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.spec.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(Some(*v)),
            Some(ParamValue::Number(_)) => Err(Self::invalid(key, "must be finite")),
            Some(ParamValue::Text(s)) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| Self::invalid(key, format!("expected a number, found `{s}`"))),
        }
    }

    fn real(&self, key: &str, default: f64, min: f64) -> Result<f64> {
        let v = self.number(key)?.unwrap_or(default);
        if v < min {
            return Err(Self::invalid(key, format!("must be at least {min}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        let Some(v) = self.number(key)? else {
            return Ok(default);
        };
        if v.fract() != 0.0 || v < min as f64 {
            return Err(Self::invalid(key, format!("expected an integer ≥ {min}, found {v}")));
        }
        Ok(v as usize)
    }

    fn optional_count(&self, key: &str, default: Option<usize>) -> Result<Option<usize>> {
        match self.spec.params.get(key) {
            Some(ParamValue::Text(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(_) => self.count(key, 0, 1).map(Some),
            None => Ok(default),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.spec.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(v)) if *v == 0.0 || *v == 1.0 => Ok(*v == 1.0),
            Some(ParamValue::Text(s)) => match s.to_ascii_lowercase().as_str() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(Self::invalid(key, format!("expected true or false, found `{s}`"))),
            },
            Some(v) => Err(Self::invalid(key, format!("expected true or false, found {v}"))),
        }
    }

    fn budget(&self, key: &str) -> Result<FeatureBudget> {
        match self.spec.params.get(key) {
            None => Ok(FeatureBudget::Sqrt),
            Some(ParamValue::Text(s)) => match s.to_ascii_lowercase().as_str() {
                "sqrt" => Ok(FeatureBudget::Sqrt),
                "log2" => Ok(FeatureBudget::Log2),
                "all" | "none" => Ok(FeatureBudget::All),
                _ => self.count(key, 0, 1).map(FeatureBudget::Count),
            },
            Some(_) => self.count(key, 0, 1).map(FeatureBudget::Count),
        }
    }
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> Self {
        ClassifierSpec {
            kind,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Checks keys and values without fitting anything.
    pub fn validate(&self) -> Result<()> {
        self.resolve(1).map(|_| ())
    }

    fn resolve(&self, n_features: usize) -> Result<Resolved> {
        let allowed = self.kind.param_keys();
        if let Some(key) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::UnsupportedParam {
                kind: self.kind.to_string(),
                key: key.clone(),
            });
        }
        let r = ParamReader { spec: self };
        Ok(match self.kind {
            ClassifierKind::GaussianNb => Resolved::Nb {
                var_smoothing: r.real("var_smoothing", 1e-9, 0.0)?,
            },
            ClassifierKind::LdaClassifier => {
                if let Some(v) = self.params.get("solver") {
                    if v != &ParamValue::Text("svd".into()) {
                        return Err(ParamReader::invalid("solver", format!("only `svd` is available, found `{v}`")));
                    }
                }
                Resolved::Lda
            }
            ClassifierKind::RandomForest => Resolved::Forest(ForestParams {
                n_estimators: r.count("n_estimators", 100, 1)?,
                bootstrap: r.flag("bootstrap", true)?,
                tree: TreeParams {
                    max_depth: r.optional_count("max_depth", None)?,
                    min_samples_split: r.count("min_samples_split", 2, 2)?,
                    min_samples_leaf: r.count("min_samples_leaf", 1, 1)?,
                    max_features: r.budget("max_features")?.resolve(n_features),
                },
            }),
            ClassifierKind::GradientBoost => Resolved::Boost(BoostParams {
                n_estimators: r.count("n_estimators", 100, 0)?,
                learning_rate: r.real("learning_rate", 0.3, 0.0)?,
                max_depth: r.count("max_depth", 6, 0)?,
                reg_lambda: r.real("reg_lambda", 1.0, 0.0)?,
                min_child_weight: r.real("min_child_weight", 1.0, 0.0)?,
            }),
            ClassifierKind::TsForest => Resolved::Ts(TsForestParams {
                n_estimators: r.count("n_estimators", 200, 1)?,
                n_intervals: r.optional_count("n_intervals", None)?,
                min_interval: r.count("min_interval", 3, 2)?,
                max_depth: r.optional_count("max_depth", None)?,
            }),
        })
    }
}

/// Anything that maps feature rows to class probabilities.
pub trait ProbaModel {
    fn n_classes(&self) -> usize;
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum FittedModel {
    GaussianNb(GaussianNb),
    LdaClassifier(LdaClassifier),
    RandomForest(RandomForest),
    GradientBoost(GradientBoost),
    TsForest(TsForest),
}

/// A fitted classifier over classes `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    pub n_classes: usize,
    pub n_features: usize,
    pub model: FittedModel,
}

/// Fit `spec` on rows `x` with labels `y` in `0..n_classes`. Every class
/// must occur at least once.
pub fn fit(spec: &ClassifierSpec, x: ArrayView2<f64>, y: &[usize], n_classes: usize) -> Result<TrainedClassifier> {
    let (n, m) = x.dim();
    if n_classes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {n_classes}")));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{n} rows but {} labels", y.len())));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("no feature columns".into()));
    }
    let mut seen = vec![false; n_classes];
    for &label in y {
        if label >= n_classes {
            return Err(Error::InvalidArgument(format!("label {label} outside 0..{n_classes}")));
        }
        seen[label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!("class {missing} has no training rows")));
    }
    let model = match spec.resolve(m)? {
        Resolved::Nb { var_smoothing } => FittedModel::GaussianNb(GaussianNb::fit(x, y, n_classes, var_smoothing)?),
        Resolved::Lda => FittedModel::LdaClassifier(LdaClassifier::fit(x, y, n_classes)?),
        Resolved::Forest(p) => FittedModel::RandomForest(RandomForest::fit(x, y, n_classes, &p, spec.seed)),
        Resolved::Boost(p) => FittedModel::GradientBoost(GradientBoost::fit(x, y, n_classes, &p)),
        Resolved::Ts(p) => FittedModel::TsForest(TsForest::fit(x, y, n_classes, &p, spec.seed)?),
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        n_classes,
        n_features: m,
        model,
    })
}

impl TrainedClassifier {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl ProbaModel for TrainedClassifier {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        Ok(match &self.model {
            FittedModel::GaussianNb(m) => m.predict_proba(x),
            FittedModel::LdaClassifier(m) => m.predict_proba(x)?,
            FittedModel::RandomForest(m) => m.predict_proba(x),
            FittedModel::GradientBoost(m) => m.predict_proba(x),
            FittedModel::TsForest(m) => m.predict_proba(x),
        })
    }
}

/// Row-wise softmax, shifted by the row maximum.
pub(crate) fn softmax_rows(mut scores: Array2<f64>) -> Array2<f64> {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn blobs(seed: u64, n_per: usize, c: usize, m: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = SeededRng::new(seed);
        let n = n_per * c;
        let y: Vec<usize> = (0..n).map(|i| i % c).collect();
        let x = Array2::from_shape_fn((n, m), |(i, j)| (y[i] * (j + 1)) as f64 + 2.0 * rng.unit());
        (x, y)
    }

    fn all_specs() -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::new(ClassifierKind::GaussianNb, 0),
            ClassifierSpec::new(ClassifierKind::LdaClassifier, 0).with("solver", "svd"),
            ClassifierSpec::new(ClassifierKind::RandomForest, 5).with("n_estimators", 20),
            ClassifierSpec::new(ClassifierKind::GradientBoost, 0)
                .with("n_estimators", 10)
                .with("max_depth", 3),
            ClassifierSpec::new(ClassifierKind::TsForest, 2).with("n_estimators", 10),
        ]
    }

    #[test]
    fn rows_sum_to_one_for_every_kind() {
        let (x, y) = blobs(1, 15, 4, 8);
        let (q, _) = blobs(2, 5, 4, 8);
        for spec in all_specs() {
            let model = fit(&spec, x.view(), &y, 4).unwrap();
            let p = model.predict_proba(q.view()).unwrap();
            for row in p.outer_iter() {
                assert!((row.sum() - 1.0).abs() < 1e-9, "{}", spec.kind);
                assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn fits_are_deterministic_and_round_trip() {
        let (x, y) = blobs(3, 10, 3, 6);
        for spec in all_specs() {
            let a = fit(&spec, x.view(), &y, 3).unwrap();
            let b = fit(&spec, x.view(), &y, 3).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            let back = TrainedClassifier::from_json(&a.to_json().unwrap()).unwrap();
            let pa = a.predict_proba(x.view()).unwrap();
            let pb = back.predict_proba(x.view()).unwrap();
            assert!(pa.iter().zip(pb.iter()).all(|(u, v)| u.to_bits() == v.to_bits()), "{}", spec.kind);
        }
    }

    #[test]
    fn nb_recovers_class_means() {
        // Samples with exact sample means ∓1.
        let x = ndarray::array![[-2.0], [-1.0], [0.0], [0.0], [1.0], [2.0]];
        let m = fit(&ClassifierSpec::new(ClassifierKind::GaussianNb, 0), x.view(), &[0, 0, 0, 1, 1, 1], 2).unwrap();
        let FittedModel::GaussianNb(nb) = &m.model else { panic!() };
        assert!((nb.means[[0, 0]] + 1.0).abs() < 1e-12);
        assert!((nb.means[[1, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported_key_is_rejected() {
        let spec = ClassifierSpec::new(ClassifierKind::RandomForest, 0).with("learning_rate", 0.1);
        assert!(matches!(spec.validate(), Err(Error::UnsupportedParam { .. })));
        let spec = ClassifierSpec::new(ClassifierKind::RandomForest, 0).with("n_estimators", 2.5);
        assert!(matches!(spec.validate(), Err(Error::InvalidParam { .. })));
        let spec = ClassifierSpec::new(ClassifierKind::LdaClassifier, 0).with("solver", "lsqr");
        assert!(spec.validate().is_err());
    }

    #[test]
    fn arity_mismatch() {
        let (x, y) = blobs(4, 5, 2, 3);
        let m = fit(&ClassifierSpec::new(ClassifierKind::GaussianNb, 0), x.view(), &y, 2).unwrap();
        let bad = Array2::zeros((2, 4));
        assert!(matches!(m.predict_proba(bad.view()), Err(Error::DimensionMismatch { expected: 3, found: 4 })));
    }

    #[test]
    fn lda_needs_spread() {
        let x = Array2::from_elem((6, 2), 1.0);
        let spec = ClassifierSpec::new(ClassifierKind::LdaClassifier, 0);
        assert!(fit(&spec, x.view(), &[0, 0, 0, 1, 1, 1], 2).is_err());
    }

    #[test]
    fn max_features_default_is_sqrt() {
        let spec = ClassifierSpec::new(ClassifierKind::RandomForest, 0);
        let Resolved::Forest(p) = spec.resolve(10).unwrap() else { panic!() };
        assert_eq!(p.tree.max_features, Some(3));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax_rows(ndarray::array![[1.0, 2.0, 3.0]]);
        let b = softmax_rows(ndarray::array![[1001.0, 1002.0, 1003.0]]);
        assert!(a.iter().zip(b.iter()).all(|(u, v)| (u - v).abs() < 1e-15));
    }
}
