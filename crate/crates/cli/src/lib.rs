pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use hiergen::data::{load_table, Dataset};
use hiergen::eval::{build_hierarchy, run_cv, EvalReport};
use hiergen::hierarchy::{export_newick, tree_fingerprint, HierarchyTree};
use hiergen::{Error, ErrorCategory};
use serde::Serialize;

pub use config::{parse_config, DatasetConfig, RawConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numeric => 4,
            },
            CliError::Output { .. } => 3,
        }
    }
}

/// Everything written as `report.json`: the dataset echo plus the report.
#[derive(Debug, Serialize)]
pub struct BenchReport<'a> {
    pub dataset: &'a DatasetConfig,
    #[serde(flatten)]
    pub report: &'a EvalReport,
}

fn load(cfg: &RunConfig) -> Result<Dataset, CliError> {
    Ok(load_table(&cfg.dataset.path, &cfg.dataset.load_options())?)
}

/// Write all files or none: each goes to a temporary sibling first and is
/// renamed once every temporary file exists.
fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), CliError> {
    let out_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Output { path, source }
    };
    fs::create_dir_all(dir).map_err(out_err(dir))?;
    let mut staged = Vec::new();
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(out_err(&tmp))?;
        f.write_all(bytes).map_err(out_err(&tmp))?;
        f.sync_all().map_err(out_err(&tmp))?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dst) in &staged {
        fs::rename(tmp, dst).map_err(out_err(dst))?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

/// Plain-text summary: scheme, mean macro-F1, LE, wall seconds.
pub fn summary_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:<22} {:<22} {:>10}", "scheme", "macro_f1", "le", "seconds");
    for s in &report.summary {
        let _ = writeln!(
            out,
            "{:<12} {:<22} {:<22} {:>10.3}",
            s.scheme.as_str(),
            s.mean_macro_f1,
            fmt_opt(s.learning_efficiency),
            s.counters.wall_seconds
        );
    }
    out
}

/// Run cross-validation and write `report.json`, `report.csv`,
/// `timings.json` and one `fold<k>.nwk` per fold into the output directory.
pub fn cmd_bench(cfg: &RunConfig) -> Result<EvalReport, CliError> {
    let ds = load(cfg)?;
    let report = run_cv(&cfg.cv, &ds)?;
    let json = serde_json::to_string_pretty(&BenchReport {
        dataset: &cfg.dataset,
        report: &report,
    })
    .map_err(Error::from)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let timings = serde_json::to_string_pretty(&report.timings()).map_err(Error::from)?;
    let mut files = vec![
        ("report.json".to_string(), (json + "\n").into_bytes()),
        ("report.csv".to_string(), csv),
        ("timings.json".to_string(), (timings + "\n").into_bytes()),
    ];
    for f in &report.folds {
        if let Some(nwk) = &f.newick {
            files.push((format!("fold{}.nwk", f.fold), format!("{nwk}\n").into_bytes()));
        }
    }
    write_all(&cfg.output_dir, &files)?;
    Ok(report)
}

/// One row per node: index, parent, position, children, class.
pub fn node_table(tree: &HierarchyTree, names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4} {:>6} {:>4} {:>5} {:>5}  class", "node", "parent", "side", "left", "right");
    let dash = || "-".to_string();
    for n in tree.nodes() {
        let [l, r] = n.children.map(|[l, r]| [l.to_string(), r.to_string()]).unwrap_or_else(|| [dash(), dash()]);
        let _ = writeln!(
            out,
            "{:>4} {:>6} {:>4} {:>5} {:>5}  {}",
            n.index,
            n.parent.map(|p| p.to_string()).unwrap_or_else(dash),
            n.position.map(|p| p.to_string()).unwrap_or_else(dash),
            l,
            r,
            n.leaf_class.map(|c| names[c].clone()).unwrap_or_default()
        );
    }
    out
}

pub struct TreeOutput {
    pub tree: HierarchyTree,
    pub newick: String,
    pub fingerprint: String,
    pub table: String,
}

/// Build one hierarchy from the whole dataset and write `tree.nwk` and
/// `tree.json` into the output directory.
pub fn cmd_tree(cfg: &RunConfig) -> Result<TreeOutput, CliError> {
    let ds = load(cfg)?;
    let h = build_hierarchy(ds.features().view(), ds.labels(), ds.n_classes(), &cfg.cv.hierarchy)?;
    let newick = export_newick(&h.tree, ds.class_names());
    let table = node_table(&h.tree, ds.class_names());
    write_all(
        &cfg.output_dir,
        &[
            ("tree.nwk".into(), format!("{newick}\n").into_bytes()),
            ("tree.json".into(), (h.tree.to_json()? + "\n").into_bytes()),
        ],
    )?;
    Ok(TreeOutput {
        fingerprint: tree_fingerprint(&newick),
        tree: h.tree,
        newick,
        table,
    })
}
