//! Supervised dimension reduction with linear discriminant analysis.
//!
//! The discriminant directions come from two symmetric eigenproblems: the
//! within-class covariance (with a small diagonal shrinkage) is whitened
//! first, and the between-class covariance is then diagonalised in the
//! whitened frame. No matrix is inverted explicitly. Directions are scaled
//! so that projected within-class covariance is (nearly) the identity.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, canonical_sign, from_na, symmetric_eigen_desc, to_na};

/// Default cumulative explained-variance target for choosing `k`.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

/// A fitted linear projection `Rᵐ → Rᵏ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub input_dim: usize,
    pub output_dim: usize,
    pub mean: Array1<f64>,
    /// `input_dim × output_dim`, columns in ratio order.
    pub basis: Array2<f64>,
    /// One entry per discriminant direction, `min(m, c-1)` in total.
    pub explained_variance_ratio: Vec<f64>,
}

impl Projection {
    /// Keep only the first `k` directions.
    pub fn truncate(&self, k: usize) -> Result<Projection> {
        if k == 0 || k > self.explained_variance_ratio.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {k} of {} components",
                self.explained_variance_ratio.len()
            )));
        }
        Ok(Projection {
            input_dim: self.input_dim,
            output_dim: k,
            mean: self.mean.clone(),
            basis: self.basis.slice(ndarray::s![.., ..k]).to_owned(),
            explained_variance_ratio: self.explained_variance_ratio.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fit LDA keeping every discriminant direction.
pub fn fit_lda(x: ArrayView2<f64>, y: &[usize]) -> Result<Projection> {
    let n_classes = y.iter().max().map_or(0, |&c| c + 1);
    if n_classes < 2 {
        return Err(Error::InvalidArgument("LDA needs at least 2 classes".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    let m = x.ncols();
    let w = linalg::within_class_whitening(x, y, n_classes)?;
    let n = x.nrows() as f64;

    // Between-class covariance in the whitened frame: Bw Bwᵀ with
    // Bw[:, j] = sqrt(n_j / n) · Wᵀ(μ_j − μ).
    let map = to_na(w.map.view());
    let mut offsets = DMatrix::zeros(m, n_classes);
    for j in 0..n_classes {
        let weight = (w.counts[j] as f64 / n).sqrt();
        for i in 0..m {
            offsets[(i, j)] = weight * (w.class_means[[j, i]] - w.overall_mean[i]);
        }
    }
    let bw = map.transpose() * offsets;
    let sb = &bw * bw.transpose();
    let (values, vectors) = symmetric_eigen_desc(&sb)?;

    let d = m.min(n_classes - 1);
    let kept: Vec<f64> = values.iter().take(d).map(|&v| v.max(0.0)).collect();
    let total: f64 = kept.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numeric(
            "between-class scatter vanishes: all class means coincide".into(),
        ));
    }
    let ratios: Vec<f64> = kept.iter().map(|v| v / total).collect();

    let directions = map * vectors.columns(0, d);
    let mut basis = from_na(&directions);
    for mut col in basis.axis_iter_mut(Axis(1)) {
        let mut v = col.to_vec();
        canonical_sign(&mut v);
        col.assign(&Array1::from(v));
    }
    Ok(Projection {
        input_dim: m,
        output_dim: d,
        mean: w.overall_mean,
        basis,
        explained_variance_ratio: ratios,
    })
}

/// Fit LDA and keep the smallest prefix reaching `threshold`.
pub fn fit_lda_auto(x: ArrayView2<f64>, y: &[usize], threshold: f64) -> Result<Projection> {
    let full = fit_lda(x, y)?;
    let k = select_components(&full.explained_variance_ratio, threshold)?;
    full.truncate(k)
}

/// Smallest `k` whose leading `k` ratios sum to at least `threshold`.
pub fn select_components(ratios: &[f64], threshold: f64) -> Result<usize> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("empty variance-ratio vector".into()));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "variance ratios sum to {total}, not 1"
        )));
    }
    let mut cumulative = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        // Rounding in the running sum must not push an exact hit below target.
        if cumulative >= threshold - 1e-12 {
            return Ok(i + 1);
        }
    }
    Ok(ratios.len())
}

pub fn transform(p: &Projection, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != p.input_dim {
        return Err(Error::DimensionMismatch {
            expected: p.input_dim,
            found: x.ncols(),
        });
    }
    let centered = &x - &p.mean.view().insert_axis(Axis(0));
    Ok(centered.dot(&p.basis.slice(ndarray::s![.., ..p.output_dim])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_dimensional_two_classes() {
        let x = array![[-1.2], [-0.8], [-1.0], [0.8], [1.2], [1.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let p = fit_lda(x.view(), &y).unwrap();
        assert_eq!(p.explained_variance_ratio, vec![1.0]);
        assert_eq!(p.output_dim, 1);
        assert!(p.basis[[0, 0]] > 0.0);
    }

    #[test]
    fn ratio_count_is_min_m_c_minus_1() {
        let x = array![
            [0.0, 1.0, 3.0],
            [0.5, 1.2, 2.0],
            [4.0, 0.1, 1.0],
            [4.5, 0.3, 1.5],
            [1.0, 5.0, 0.0],
            [1.1, 5.5, 0.4],
            [3.0, 3.0, 3.0],
            [3.3, 2.9, 3.1]
        ];
        let y = [0, 0, 1, 1, 2, 2, 3, 3];
        assert_eq!(fit_lda(x.view(), &y).unwrap().explained_variance_ratio.len(), 3);
        assert_eq!(
            fit_lda(x.slice(ndarray::s![.., ..2]), &y)
                .unwrap()
                .explained_variance_ratio
                .len(),
            2
        );
        let y2 = [0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(fit_lda(x.view(), &y2).unwrap().explained_variance_ratio.len(), 1);
    }

    #[test]
    fn select_components_examples() {
        assert_eq!(select_components(&[0.96, 0.04], 0.95).unwrap(), 1);
        assert_eq!(select_components(&[0.5, 0.45, 0.05], 0.95).unwrap(), 2);
        assert_eq!(select_components(&[0.3, 0.3, 0.3, 0.1], 0.95).unwrap(), 4);
        assert!(select_components(&[], 0.95).is_err());
    }

    #[test]
    fn identical_points_fail() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(
            fit_lda(x.view(), &[0, 0, 1, 1]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn transform_centers_the_mean() {
        let x = array![[0.0, 0.0], [1.0, 0.5], [4.0, 3.0], [5.0, 4.0], [0.5, 1.0], [4.5, 2.5]];
        let y = [0, 0, 1, 1, 0, 1];
        let p = fit_lda(x.view(), &y).unwrap();
        let z = transform(&p, p.mean.view().insert_axis(Axis(0))).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            transform(&p, array![[1.0, 2.0, 3.0]].view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_basis_centers_input() {
        let p = Projection {
            input_dim: 1,
            output_dim: 1,
            mean: array![2.0],
            basis: array![[1.0]],
            explained_variance_ratio: vec![1.0],
        };
        let z = transform(&p, array![[3.0], [-1.0]].view()).unwrap();
        assert_eq!(z, array![[1.0], [-3.0]]);
    }

    #[test]
    fn json_round_trip() {
        let x = array![[0.0, 0.1], [1.0, 0.4], [4.0, 3.0], [5.0, 4.2], [0.5, 1.0], [4.5, 2.5]];
        let p = fit_lda(x.view(), &[0, 0, 1, 1, 0, 1]).unwrap();
        let back: Projection = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
