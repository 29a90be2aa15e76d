//! Run configuration: a flat `key = value` file plus `--key value` flags.
//!
//! ```text
//! # glass.conf
//! dataset.path = data/glass.csv
//! classifier.kind = random_forest
//! classifier.params.n_estimators = 300
//! classifier.params.max_depth = 10
//! schemes = all
//! ```
//!
//! Flags take precedence over the file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hiergen::classifiers::{ClassifierKind, ClassifierSpec, ParamValue};
use hiergen::data::{LabelColumn, LoadOptions, TableFormat};
use hiergen::eval::{CvConfig, HierarchyConfig, HierarchyMethod};
use hiergen::hierarchy::Linkage;
use hiergen::reduce::DEFAULT_VARIANCE_THRESHOLD;
use hiergen::schemes::SchemeKind;
use serde::Serialize;

use crate::CliError;

const KEYS: &[&str] = &[
    "dataset.path",
    "dataset.format",
    "dataset.label_column",
    "dataset.header",
    "seed",
    "cv.folds",
    "reduce.enabled",
    "reduce.kind",
    "reduce.variance_threshold",
    "hierarchy.method",
    "hierarchy.linkage",
    "hierarchy.clusterer",
    "schemes",
    "classifier.kind",
    "output.dir",
];

const PARAM_PREFIX: &str = "classifier.params.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: TableFormat,
    pub label_column: String,
    pub header: bool,
}

impl DatasetConfig {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            format: self.format,
            label_column: self.label_column.parse().unwrap_or(LabelColumn::Last),
            has_header: self.header,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub cv: CvConfig,
    pub output_dir: PathBuf,
}

/// Key/value pairs before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_text(text: &str) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if raw.entries.contains_key(key) {
                return Err(CliError::Config(format!("line {}: `{key}` given twice", n + 1)));
            }
            raw.set(key, value.trim())?;
        }
        Ok(raw)
    }

    pub fn read_file(path: &Path) -> Result<RawConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        RawConfig::parse_text(&text)
    }

    /// Apply `--key value` / `--key=value` flags on top.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let body = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Config(format!("unexpected argument `{arg}`")))?;
            let (key, value) = match body.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| CliError::Config(format!("flag `--{body}` needs a value")))?;
                    (body.to_string(), v.clone())
                }
            };
            self.set(&key, &value)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let known = KEYS.contains(&key) || key.strip_prefix(PARAM_PREFIX).is_some_and(|p| !p.is_empty());
        if !known {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        let value = value.trim().trim_matches('"');
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| invalid(key, v, e)),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(invalid(key, v, "expected true or false")),
        }
    }

    /// Resolve defaults and validate everything.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let path = self
            .get("dataset.path")
            .filter(|p| !p.is_empty())
            .ok_or_else(|| CliError::Config("missing `dataset.path`".into()))?;
        let format: TableFormat = self.parsed("dataset.format", TableFormat::Csv)?;
        let label_column = self.get("dataset.label_column").unwrap_or("last").to_string();
        label_column
            .parse::<LabelColumn>()
            .map_err(|e| invalid("dataset.label_column", &label_column, e))?;
        let dataset = DatasetConfig {
            path: PathBuf::from(path),
            format,
            label_column,
            header: self.flag("dataset.header", true)?,
        };

        let seed: u64 = self.parsed("seed", 0)?;
        let folds: usize = self.parsed("cv.folds", 5)?;
        if folds < 2 {
            return Err(invalid("cv.folds", &folds.to_string(), "must be at least 2"));
        }

        if let Some(kind) = self.get("reduce.kind") {
            if kind != "lda" {
                return Err(invalid("reduce.kind", kind, "only `lda` is available"));
            }
        }
        let threshold: f64 = self.parsed("reduce.variance_threshold", DEFAULT_VARIANCE_THRESHOLD)?;
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(invalid("reduce.variance_threshold", &threshold.to_string(), "must lie in (0, 1]"));
        }
        let reduce_threshold = self.flag("reduce.enabled", true)?.then_some(threshold);

        let method: HierarchyMethod = self.parsed("hierarchy.method", HierarchyMethod::Divisive)?;
        let linkage: Linkage = self.parsed("hierarchy.linkage", Linkage::Single)?;
        if let Some(c) = self.get("hierarchy.clusterer") {
            if c != "kmedoids" {
                return Err(invalid("hierarchy.clusterer", c, "only `kmedoids` is available"));
            }
        }

        let schemes = match self.get("schemes").unwrap_or("all") {
            "all" => SchemeKind::ALL.to_vec(),
            list => list
                .split(',')
                .map(|s| s.trim().parse::<SchemeKind>().map_err(|e| invalid("schemes", s, e)))
                .collect::<Result<Vec<_>, _>>()?,
        };

        let kind_text = self
            .get("classifier.kind")
            .ok_or_else(|| CliError::Config("missing `classifier.kind`".into()))?;
        let kind: ClassifierKind = kind_text.parse().map_err(|e| invalid("classifier.kind", kind_text, e))?;
        let mut classifier = ClassifierSpec::new(kind, seed);
        for (key, value) in &self.entries {
            if let Some(param) = key.strip_prefix(PARAM_PREFIX) {
                let v = match value.parse::<f64>() {
                    Ok(x) => ParamValue::Number(x),
                    Err(_) => ParamValue::Text(value.clone()),
                };
                classifier.params.insert(param.to_string(), v);
            }
        }
        classifier.validate().map_err(|e| CliError::Config(e.to_string()))?;

        Ok(RunConfig {
            dataset,
            cv: CvConfig {
                seed,
                folds,
                hierarchy: HierarchyConfig {
                    method,
                    linkage,
                    reduce_threshold,
                },
                schemes,
                classifier,
            },
            output_dir: PathBuf::from(self.get("output.dir").unwrap_or("hiergen-out")),
        })
    }
}

fn invalid(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}` = `{value}`: {why}"))
}

/// Read the optional config file, apply flags, resolve.
pub fn parse_config(file: Option<&Path>, flags: &[String]) -> Result<RunConfig, CliError> {
    let mut raw = match file {
        Some(p) => RawConfig::read_file(p)?,
        None => RawConfig::default(),
    };
    raw.apply_flags(flags)?;
    raw.resolve()
}
