//! Forest over random-interval summary features of time series.
//!
//! Every tree draws its own set of intervals and sees, for each interval,
//! the mean, population standard deviation and least-squares slope of the
//! sub-series. Trees are grown on the full training set with all interval
//! features as candidates; the forest output is the mean leaf distribution.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::mean_tree_proba;
use super::tree::{DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsForestParams {
    pub n_estimators: usize,
    /// Intervals per tree; `None` uses ⌊√L⌋.
    pub n_intervals: Option<usize>,
    pub min_interval: usize,
    pub max_depth: Option<usize>,
}

impl Default for TsForestParams {
    fn default() -> Self {
        TsForestParams {
            n_estimators: 200,
            n_intervals: None,
            min_interval: 3,
            max_depth: None,
        }
    }
}

/// Half-open interval `[start, end)` of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTree {
    pub intervals: Vec<Interval>,
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsForest {
    pub trees: Vec<IntervalTree>,
    pub n_classes: usize,
    pub series_len: usize,
}

/// Mean, population standard deviation and least-squares slope of
/// `series[a..b]` against the positions 0, 1, ..., b − a − 1.
pub fn interval_stats(series: &[f64], a: usize, b: usize) -> (f64, f64, f64) {
    let w = &series[a..b];
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let t_mean = (n - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in w.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (mean, var.sqrt(), slope)
}

fn draw_intervals(rng: &mut SeededRng, len: usize, count: usize, min_len: usize) -> Vec<Interval> {
    let min_len = min_len.clamp(2, len);
    (0..count)
        .map(|_| {
            let width = rng.between(min_len, len);
            let start = rng.below(len - width + 1);
            Interval {
                start,
                end: start + width,
            }
        })
        .collect()
}

fn features_for(x: ArrayView2<f64>, intervals: &[Interval]) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), 3 * intervals.len()));
    for (mut dst, row) in out.outer_iter_mut().zip(x.outer_iter()) {
        let series = row.to_vec();
        for (j, iv) in intervals.iter().enumerate() {
            let (mean, sd, slope) = interval_stats(&series, iv.start, iv.end);
            dst[3 * j] = mean;
            dst[3 * j + 1] = sd;
            dst[3 * j + 2] = slope;
        }
    }
    out
}

fn default_intervals(len: usize) -> usize {
    ((len as f64).sqrt().floor() as usize).max(1)
}

/// Interval features of every row of `x` for `n_intervals` intervals drawn
/// from `seed`. Columns come in (mean, sd, slope) triples, one per interval.
pub fn ts_interval_features(x: ArrayView2<f64>, n_intervals: usize, seed: u64) -> Result<Array2<f64>> {
    let len = x.ncols();
    if len < 3 {
        return Err(Error::InvalidArgument(format!(
            "series length {len} is below the minimum of 3"
        )));
    }
    let intervals = draw_intervals(&mut SeededRng::new(seed), len, n_intervals, 3);
    Ok(features_for(x, &intervals))
}

impl TsForest {
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        n_classes: usize,
        params: &TsForestParams,
        seed: u64,
    ) -> Result<TsForest> {
        let len = x.ncols();
        if len < 3 {
            return Err(Error::InvalidArgument(format!(
                "series length {len} is below the minimum of 3"
            )));
        }
        let count = params.n_intervals.unwrap_or_else(|| default_intervals(len));
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            ..Default::default()
        };
        let all: Vec<usize> = (0..x.nrows()).collect();
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = SeededRng::substream(seed, t as u64);
                let intervals = draw_intervals(&mut rng, len, count, params.min_interval);
                let feats = features_for(x, &intervals);
                let tree = DecisionTree::fit(feats.view(), y, &all, n_classes, tree_params, &mut rng);
                IntervalTree { intervals, tree }
            })
            .collect();
        Ok(TsForest {
            trees,
            n_classes,
            series_len: len,
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for member in &self.trees {
            let feats = features_for(x, &member.intervals);
            out += &mean_tree_proba(std::slice::from_ref(&member.tree), self.n_classes, feats.view());
        }
        out / self.trees.len() as f64
    }
}
