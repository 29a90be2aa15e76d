//! Flat-labeled datasets: loading, shuffling, stratified folds.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// `n` rows of `m` real features with one flat class label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    is_timeseries: bool,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        is_timeseries: bool,
    ) -> Result<Self> {
        let c = class_names.len();
        if c < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, found {c}"
            )));
        }
        if features.nrows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}",
                pos / features.ncols()
            )));
        }
        let mut seen = vec![false; c];
        for &y in &labels {
            if y >= c {
                return Err(Error::InvalidDataset(format!(
                    "label {y} outside 0..{c}"
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!(
                "class {missing} ({}) has no instances",
                class_names[missing]
            )));
        }
        Ok(Dataset {
            features,
            labels,
            class_names,
            is_timeseries,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn is_timeseries(&self) -> bool {
        self.is_timeseries
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows `idx` as an owned (features, labels) pair. The subset need not
    /// contain every class, so it is not wrapped back into a `Dataset`.
    pub fn take(&self, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (
            self.features.select(Axis(0), idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    UcrTsv,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "ucr_tsv" => Ok(TableFormat::UcrTsv),
            other => Err(format!("unknown format `{other}` (expected csv or ucr_tsv)")),
        }
    }
}

impl std::fmt::Display for TableFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::UcrTsv => "ucr_tsv",
        })
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "last" {
            Ok(LabelColumn::Last)
        } else if let Ok(i) = s.parse::<usize>() {
            Ok(LabelColumn::Index(i))
        } else if s.is_empty() {
            Err("empty label column".into())
        } else {
            Ok(LabelColumn::Name(s.to_string()))
        }
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub format: TableFormat,
    pub label_column: LabelColumn,
    /// First CSV row is a header. Ignored for `ucr_tsv`, which has none.
    pub has_header: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            format: TableFormat::Csv,
            label_column: LabelColumn::Last,
            has_header: true,
        }
    }
}

/// Load a dataset. Class ids follow the order in which distinct raw labels
/// first appear in the file.
pub fn load_table(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (delimiter, has_header) = match opts.format {
        TableFormat::Csv => (b',', opts.has_header),
        TableFormat::UcrTsv => (b'\t', false),
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut records = reader.records().enumerate();
    let mut label_idx: Option<usize> = match (&opts.format, &opts.label_column) {
        (TableFormat::UcrTsv, _) => Some(0),
        (_, LabelColumn::Index(i)) => Some(*i),
        _ => None,
    };
    if has_header {
        let header = match records.next() {
            Some((_, rec)) => rec.map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(parse_err(1, "file is empty".into())),
        };
        if let LabelColumn::Name(name) = &opts.label_column {
            label_idx = Some(header.iter().position(|h| h == name).ok_or_else(|| {
                parse_err(1, format!("label column `{name}` not in header"))
            })?);
        }
    } else if let (TableFormat::Csv, LabelColumn::Name(name)) = (opts.format, &opts.label_column) {
        return Err(parse_err(
            1,
            format!("label column `{name}` given by name but the file has no header"),
        ));
    }

    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (row, rec) in records {
        let line = row + 1;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        // UCR files occasionally carry a trailing delimiter.
        let cells: Vec<&str> = {
            let mut v: Vec<&str> = rec.iter().collect();
            while v.last() == Some(&"") && v.len() > 1 {
                v.pop();
            }
            v
        };
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(parse_err(
                    line,
                    format!("ragged row: {} columns, expected {w}", cells.len()),
                ))
            }
            _ => {}
        }
        let lab = label_idx.unwrap_or(cells.len() - 1);
        if lab >= cells.len() {
            return Err(parse_err(
                line,
                format!("label column {lab} out of range for {} columns", cells.len()),
            ));
        }
        if cells.len() < 2 {
            return Err(parse_err(line, "row has no feature columns".into()));
        }
        for (j, cell) in cells.iter().enumerate() {
            if j == lab {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(line, format!("column {j}: `{cell}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {j}: non-finite value `{cell}`")));
            }
            values.push(v);
        }
        raw_labels.push(cells[lab].to_string());
    }

    let n = raw_labels.len();
    if n == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }
    let m = values.len() / n;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let labels = raw_labels
        .into_iter()
        .map(|raw| {
            *ids.entry(raw.clone()).or_insert_with(|| {
                class_names.push(raw);
                class_names.len() - 1
            })
        })
        .collect::<Vec<_>>();
    if class_names.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "{}: fewer than 2 distinct labels",
            path.display()
        )));
    }
    let features = Array2::from_shape_vec((n, m), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Dataset::new(
        features,
        labels,
        class_names,
        opts.format == TableFormat::UcrTsv,
    )
}

/// Rows permuted by [`rng::permutation`] for `seed`.
pub fn shuffle(ds: &Dataset, seed: u64) -> Dataset {
    let order = rng::permutation(ds.n_rows(), seed);
    let (features, labels) = ds.take(&order);
    Dataset {
        features,
        labels,
        class_names: ds.class_names.clone(),
        is_timeseries: ds.is_timeseries,
    }
}

/// Fold membership for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Stratified fold assignment.
///
/// Classes are dealt round-robin over the folds in dataset order. The
/// dealing position carries over from one class to the next so fold sizes
/// stay balanced, and starts at `seed % k`. Membership is therefore a pure
/// function of row order; callers shuffle beforehand.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count {k} < 2")));
    }
    if k > ds.n_rows() {
        return Err(Error::Stratification(format!(
            "{k} folds requested for {} rows",
            ds.n_rows()
        )));
    }
    let counts = ds.class_counts();
    if let Some(j) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Stratification(format!(
            "class `{}` has a single instance; its training split would lack it",
            ds.class_names[j]
        )));
    }
    let mut assignments = vec![0; ds.n_rows()];
    let mut cursor = (seed % k as u64) as usize;
    for class in 0..ds.n_classes() {
        for (i, _) in ds.labels.iter().enumerate().filter(|(_, &y)| y == class) {
            assignments[i] = cursor;
            cursor = (cursor + 1) % k;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
