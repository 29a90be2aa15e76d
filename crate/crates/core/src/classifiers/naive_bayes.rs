use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::softmax_rows;
use crate::error::{Error, Result};

/// Gaussian naive Bayes with maximum-likelihood per-class moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
    pub log_priors: Array1<f64>,
}

impl GaussianNb {
    /// `var_smoothing` times the largest feature variance is added to
    /// every class variance.
    pub fn fit(x: ArrayView2<f64>, y: &[usize], n_classes: usize, var_smoothing: f64) -> Result<Self> {
        let (n, m) = x.dim();
        let (means, counts, _) = crate::linalg::class_statistics(x, y, n_classes);
        let mut variances = Array2::<f64>::zeros((n_classes, m));
        for (row, &label) in x.outer_iter().zip(y) {
            let mut acc = variances.row_mut(label);
            for ((v, &xi), &mu) in acc.iter_mut().zip(row.iter()).zip(means.row(label).iter()) {
                *v += (xi - mu) * (xi - mu);
            }
        }
        for (mut row, &count) in variances.outer_iter_mut().zip(&counts) {
            if count == 0 {
                return Err(Error::InvalidArgument("a class has no training rows".into()));
            }
            row /= count as f64;
        }
        let max_var = x
            .var_axis(Axis(0), 0.0)
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let epsilon = var_smoothing * max_var;
        variances.mapv_inplace(|v| v + epsilon);
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Numeric(
                "zero variance in naive Bayes; features are constant".into(),
            ));
        }
        let log_priors = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
        Ok(GaussianNb {
            means,
            variances,
            log_priors,
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.log_priors.len();
        let mut joint = Array2::zeros((x.nrows(), k));
        for (mut dst, row) in joint.outer_iter_mut().zip(x.outer_iter()) {
            for c in 0..k {
                let mut ll = self.log_priors[c];
                for ((&xi, &mu), &var) in row
                    .iter()
                    .zip(self.means.row(c).iter())
                    .zip(self.variances.row(c).iter())
                {
                    ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (xi - mu).powi(2) / var);
                }
                dst[c] = ll;
            }
        }
        softmax_rows(joint)
    }
}
