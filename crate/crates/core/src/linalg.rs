//! Small dense helpers over nalgebra's symmetric eigensolver and QR.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub(crate) fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing. Each
/// eigenvector is flipped so its largest-magnitude entry is positive.
pub(crate) fn symmetric_eigen_desc(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite matrix passed to eigensolver".into()));
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(a.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        canonical_sign(col.as_mut_slice());
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Flip `v` so its largest-magnitude entry (first one on ties) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Per-class means, counts, and the overall mean of `x`.
pub(crate) fn class_statistics(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
) -> (Array2<f64>, Vec<usize>, Array1<f64>) {
    let m = x.ncols();
    let mut means = Array2::<f64>::zeros((n_classes, m));
    let mut counts = vec![0usize; n_classes];
    for (row, &label) in x.outer_iter().zip(y) {
        counts[label] += 1;
        let mut acc = means.row_mut(label);
        acc += &row;
    }
    for (mut row, &count) in means.outer_iter_mut().zip(&counts) {
        if count > 0 {
            row /= count as f64;
        }
    }
    let overall = x
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(m));
    (means, counts, overall)
}

/// Whitening of the shrunk within-class covariance.
///
/// `map` has shape `m × s`; for any `v` in the span that matters,
/// `mapᵀ (Σ_w + λI) map = I`. When `m` exceeds `n + c` the problem is
/// restricted to an orthonormal basis of the span of the within-class
/// deviations and the class-mean offsets, outside of which both scatters
/// vanish, so the restriction is exact.
pub(crate) struct Whitening {
    pub map: Array2<f64>,
    pub class_means: Array2<f64>,
    pub counts: Vec<usize>,
    pub overall_mean: Array1<f64>,
}

pub(crate) const SHRINKAGE: f64 = 1e-6;

pub(crate) fn within_class_whitening(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
) -> Result<Whitening> {
    let (n, m) = x.dim();
    if n <= n_classes {
        return Err(Error::InvalidArgument(format!(
            "LDA needs more rows ({n}) than classes ({n_classes})"
        )));
    }
    let (class_means, counts, overall_mean) = class_statistics(x, y, n_classes);
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("class {j} has no rows")));
    }

    let mut deviations = x.to_owned();
    for (mut row, &label) in deviations.outer_iter_mut().zip(y) {
        row -= &class_means.row(label);
    }
    let total_trace: f64 = x
        .outer_iter()
        .map(|row| {
            row.iter()
                .zip(overall_mean.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n as f64;
    if !(total_trace > 0.0) || !total_trace.is_finite() {
        return Err(Error::Numeric(
            "degenerate scatter: all points are identical".into(),
        ));
    }
    let lambda = SHRINKAGE * total_trace / m as f64;

    let dev = to_na(deviations.view());
    let basis: Option<DMatrix<f64>> = if m > n + n_classes {
        let mut span = DMatrix::zeros(m, n + n_classes);
        span.view_mut((0, 0), (m, n)).copy_from(&dev.transpose());
        for j in 0..n_classes {
            for i in 0..m {
                span[(i, n + j)] = class_means[[j, i]] - overall_mean[i];
            }
        }
        Some(span.qr().q())
    } else {
        None
    };

    let reduced = match &basis {
        Some(q) => &dev * q,
        None => dev,
    };
    let dof = (n - n_classes) as f64;
    let mut sw = reduced.transpose() * &reduced / dof;
    for i in 0..sw.nrows() {
        sw[(i, i)] += lambda;
    }
    let (values, vectors) = symmetric_eigen_desc(&sw)?;
    let mut scaled = vectors;
    for (j, &ev) in values.iter().enumerate() {
        if !(ev > 0.0) {
            return Err(Error::Numeric(format!(
                "within-class covariance not positive definite (eigenvalue {ev:e})"
            )));
        }
        let s = 1.0 / ev.sqrt();
        scaled.column_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    let map = match &basis {
        Some(q) => q * scaled,
        None => scaled,
    };
    Ok(Whitening {
        map: from_na(&map),
        class_means,
        counts,
        overall_mean,
    })
}
