use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::softmax_rows;
use crate::error::Result;
use crate::reduce::{self, Projection};

/// Shared-covariance Gaussian classifier.
///
/// Scores are computed in the full discriminant space, where the shrunk
/// within-class covariance is the identity; distances there equal the
/// Mahalanobis distances up to a term common to all classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaClassifier {
    pub projection: Projection,
    pub centroids: Array2<f64>,
    pub log_priors: Array1<f64>,
}

impl LdaClassifier {
    pub fn fit(x: ArrayView2<f64>, y: &[usize], n_classes: usize) -> Result<Self> {
        let projection = reduce::fit_lda(x, y)?;
        let z = reduce::transform(&projection, x)?;
        let (centroids, counts, _) = crate::linalg::class_statistics(z.view(), y, n_classes);
        let n = y.len() as f64;
        let log_priors = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
        Ok(LdaClassifier {
            projection,
            centroids,
            log_priors,
        })
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = reduce::transform(&self.projection, x)?;
        let k = self.log_priors.len();
        let mut scores = Array2::zeros((x.nrows(), k));
        for (mut dst, row) in scores.outer_iter_mut().zip(z.outer_iter()) {
            for c in 0..k {
                let d2: f64 = row
                    .iter()
                    .zip(self.centroids.row(c).iter())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                dst[c] = self.log_priors[c] - 0.5 * d2;
            }
        }
        Ok(softmax_rows(scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn symmetric_midpoint_is_even() {
        let x = array![[-1.5], [-1.0], [-0.5], [0.5], [1.0], [1.5]];
        let m = LdaClassifier::fit(x.view(), &[0, 0, 0, 1, 1, 1], 2).unwrap();
        let p = m.predict_proba(array![[0.0], [2.0]].view()).unwrap();
        assert!((p[[0, 0]] - 0.5).abs() < 1e-6);
        assert!(p[[1, 1]] > 0.99);
    }

    #[test]
    fn matches_explicit_gaussian_posterior() {
        // Two 2-D classes; compare against log N(x; μ_c, Σ_w + λI) with the
        // pooled covariance inverted by hand. λ is the relative shrinkage
        // 1e-6 · trace(total covariance) / m.
        let x = array![
            [0.0, 0.0], [1.0, 0.5], [0.5, 1.2], [0.2, 0.8],
            [3.0, 2.0], [4.0, 2.6], [3.5, 3.1], [3.2, 2.2]
        ];
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let model = LdaClassifier::fit(x.view(), &y, 2).unwrap();
        let q = array![[2.0, 1.0]];
        let got = model.predict_proba(q.view()).unwrap();

        let mu = [[0.425, 0.625], [3.425, 2.475]];
        let mut s = [[0.0; 2]; 2];
        for (row, &c) in x.outer_iter().zip(&y) {
            let d = [row[0] - mu[c][0], row[1] - mu[c][1]];
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += d[a] * d[b] / 6.0;
                }
            }
        }
        let mean = [
            x.column(0).sum() / 8.0,
            x.column(1).sum() / 8.0,
        ];
        let trace: f64 = x
            .outer_iter()
            .map(|r| (r[0] - mean[0]).powi(2) + (r[1] - mean[1]).powi(2))
            .sum::<f64>()
            / 8.0;
        let lambda = 1e-6 * trace / 2.0;
        s[0][0] += lambda;
        s[1][1] += lambda;
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let score = |c: usize| {
            let d = [q[[0, 0]] - mu[c][0], q[[0, 1]] - mu[c][1]];
            -0.5 * (d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]))
        };
        let (a, b) = (score(0), score(1));
        let p1 = 1.0 / (1.0 + (a - b).exp());
        assert!((got[[0, 1]] - p1).abs() < 1e-10, "{} vs {p1}", got[[0, 1]]);
    }
}
