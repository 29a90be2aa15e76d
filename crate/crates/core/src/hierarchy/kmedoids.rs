//! Partitioning around medoids with deterministic BUILD and SWAP.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Medoids {
    /// Row indices of the medoids, ascending.
    pub medoids: Vec<usize>,
    /// For each point, the position in `medoids` of its cluster.
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Cost after BUILD and after each accepted swap.
    pub cost_history: Vec<f64>,
}

pub fn euclidean_distances(points: ArrayView2<f64>) -> Array2<f64> {
    let p = points.nrows();
    let mut d = Array2::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            let dist = points
                .row(i)
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    d
}

/// Sum over points of the distance to the nearest medoid.
pub fn clustering_cost(dist: &Array2<f64>, medoids: &[usize]) -> f64 {
    (0..dist.nrows())
        .map(|i| {
            medoids
                .iter()
                .map(|&m| dist[[i, m]])
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// k-medoids on Euclidean distances between the rows of `points`.
pub fn pam_kmedoids(points: ArrayView2<f64>, k: usize) -> Result<Medoids> {
    pam_with_distances(&euclidean_distances(points), k)
}

/// k-medoids on a precomputed symmetric dissimilarity matrix.
///
/// BUILD picks the point of least total distance, then repeatedly the
/// point with the largest cost reduction. SWAP then applies the best
/// (medoid, non-medoid) exchange while it strictly lowers the cost; ties
/// go to the earlier medoid and the lower candidate index.
pub fn pam_with_distances(dist: &Array2<f64>, k: usize) -> Result<Medoids> {
    let p = dist.nrows();
    if k < 1 {
        return Err(Error::InvalidArgument("k-medoids needs k >= 1".into()));
    }
    if k > p {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {p} available points"
        )));
    }

    let first = (0..p)
        .map(|i| (i, dist.row(i).sum()))
        .fold((0, f64::INFINITY), |best, (i, s)| if s < best.1 { (i, s) } else { best })
        .0;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..p).map(|j| dist[[first, j]]).collect();
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..p).filter(|c| !medoids.contains(c)) {
            let gain: f64 = (0..p).map(|j| (nearest[j] - dist[[cand, j]]).max(0.0)).sum();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((cand, gain));
            }
        }
        let (chosen, _) = best.expect("k <= p leaves a candidate");
        medoids.push(chosen);
        for j in 0..p {
            nearest[j] = nearest[j].min(dist[[chosen, j]]);
        }
    }
    medoids.sort_unstable();

    let mut cost = clustering_cost(dist, &medoids);
    let mut cost_history = vec![cost];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for cand in (0..p).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let c = clustering_cost(dist, &trial);
                if best.is_none_or(|(_, _, b)| c < b) {
                    best = Some((slot, cand, c));
                }
            }
        }
        match best {
            Some((slot, cand, c)) if c < cost => {
                medoids[slot] = cand;
                medoids.sort_unstable();
                cost = c;
                cost_history.push(c);
            }
            _ => break,
        }
    }

    let assignment = (0..p)
        .map(|i| {
            if let Some(own) = medoids.iter().position(|&m| m == i) {
                return own;
            }
            let mut best = 0;
            for (slot, &m) in medoids.iter().enumerate() {
                if dist[[i, m]] < dist[[i, medoids[best]]] {
                    best = slot;
                }
            }
            best
        })
        .collect();

    Ok(Medoids {
        medoids,
        assignment,
        cost,
        cost_history,
    })
}
