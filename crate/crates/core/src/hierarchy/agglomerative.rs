use serde::{Deserialize, Serialize};

use super::{kmedoids::euclidean_distances, ClassMeans, HierarchyTree, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Single,
    Complete,
    Average,
    Ward,
}

impl std::str::FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            other => Err(format!(
                "unknown linkage `{other}` (expected single, complete, average or ward)"
            )),
        }
    }
}

impl std::fmt::Display for Linkage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        })
    }
}

/// One agglomeration step. Cluster ids follow the usual dendrogram
/// convention: `0..p` are the input points and step `i` creates `p + i`.
/// `left` is the side holding the lower point index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Sequential agglomeration with Lance-Williams updates on Euclidean
/// distances. Among equally close pairs the one with the smallest
/// (lower id, higher id) wins.
pub fn agglomerate(points: ndarray::ArrayView2<f64>, linkage: Linkage) -> Vec<Merge> {
    let p = points.nrows();
    if p < 2 {
        return Vec::new();
    }
    let total = 2 * p - 1;
    let mut dist = vec![vec![f64::NAN; total]; total];
    let base = euclidean_distances(points);
    for i in 0..p {
        for j in 0..p {
            dist[i][j] = base[[i, j]];
        }
    }
    let mut size = vec![1usize; total];
    let mut min_member: Vec<usize> = (0..total).collect();
    let mut active: Vec<usize> = (0..p).collect();
    let mut merges = Vec::with_capacity(p - 1);

    for step in 0..p - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let d = dist[a][b];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((a, b, d));
                }
            }
        }
        let (a, b, height) = best.expect("at least two active clusters");
        let new = p + step;
        size[new] = size[a] + size[b];
        min_member[new] = min_member[a].min(min_member[b]);
        active.retain(|&x| x != a && x != b);
        for &k in &active {
            let (dak, dbk) = (dist[a][k], dist[b][k]);
            let (na, nb, nk) = (size[a] as f64, size[b] as f64, size[k] as f64);
            let d = match linkage {
                Linkage::Single => dak.min(dbk),
                Linkage::Complete => dak.max(dbk),
                Linkage::Average => (na * dak + nb * dbk) / (na + nb),
                Linkage::Ward => (((na + nk) * dak * dak + (nb + nk) * dbk * dbk
                    - nk * height * height)
                    / (na + nb + nk))
                    .max(0.0)
                    .sqrt(),
            };
            dist[new][k] = d;
            dist[k][new] = d;
        }
        active.push(new);
        let (left, right) = if min_member[a] <= min_member[b] { (a, b) } else { (b, a) };
        merges.push(Merge {
            left,
            right,
            height,
            size: size[new],
        });
    }
    merges
}

/// Bottom-up hierarchy from the class means; the last merge is the root.
pub fn build_agglomerative(cm: &ClassMeans, linkage: Linkage) -> Result<HierarchyTree> {
    let c = cm.n_classes();
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "a hierarchy needs at least 2 classes, got {c}"
        )));
    }
    let merges = agglomerate(cm.means.view(), linkage);
    let mut shapes: Vec<Option<Shape>> = (0..c).map(|i| Some(Shape::Leaf(i))).collect();
    for m in &merges {
        let left = shapes[m.left].take().expect("cluster merged once");
        let right = shapes[m.right].take().expect("cluster merged once");
        shapes.push(Some(Shape::split(left, right)));
    }
    let root = shapes.pop().flatten().expect("final merge");
    HierarchyTree::from_shape(&root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn means(rows: ndarray::Array2<f64>) -> ClassMeans {
        let c = rows.nrows();
        ClassMeans {
            means: rows,
            counts: vec![1; c],
        }
    }

    #[test]
    fn two_means_one_merge() {
        let t = build_agglomerative(&means(array![[0.0], [2.0]]), Linkage::Single).unwrap();
        assert_eq!(t.node_count(), 3);
    }

    #[test]
    fn single_linkage_trace() {
        // Pairwise distances 1 (0-1), 5 (0-2), 4 (1-2): merge {0,1} at 1,
        // then single linkage gives min(5, 4) = 4 to {2}.
        let merges = agglomerate(array![[0.0], [1.0], [5.0]].view(), Linkage::Single);
        assert_eq!(merges.len(), 2);
        assert_eq!((merges[0].left, merges[0].right, merges[0].height), (0, 1, 1.0));
        assert_eq!((merges[1].left, merges[1].right, merges[1].height), (3, 2, 4.0));
    }

    #[test]
    fn complete_and_average_heights() {
        let pts = array![[0.0], [1.0], [5.0]];
        assert_eq!(agglomerate(pts.view(), Linkage::Complete)[1].height, 5.0);
        assert_eq!(agglomerate(pts.view(), Linkage::Average)[1].height, 4.5);
        // Ward on the same points: sqrt((2*25 + 2*16 - 1)/3) = sqrt(27).
        let w = agglomerate(pts.view(), Linkage::Ward)[1].height;
        assert!((w - 27f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tight_pairs_balanced() {
        let pts = array![[0.0], [9.0], [0.1], [9.1]];
        let expected = Shape::split(
            Shape::split(Shape::Leaf(0), Shape::Leaf(2)),
            Shape::split(Shape::Leaf(1), Shape::Leaf(3)),
        );
        for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward] {
            let t = build_agglomerative(&means(pts.clone()), linkage).unwrap();
            assert_eq!(t.node_count(), 7);
            assert_eq!(t.to_shape(), expected, "{linkage}");
        }
    }
}
