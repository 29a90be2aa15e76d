use super::{kmedoids, ClassMeans, HierarchyTree, Shape};
use crate::error::{Error, Result};

/// Top-down hierarchy: split every class set with 2-medoids on its means
/// until singletons remain.
pub fn build_divisive(cm: &ClassMeans) -> Result<HierarchyTree> {
    let c = cm.n_classes();
    if c < 2 {
        return Err(Error::InvalidArgument(format!(
            "a hierarchy needs at least 2 classes, got {c}"
        )));
    }
    let dist = kmedoids::euclidean_distances(cm.means.view());
    let shape = split(&dist, (0..c).collect())?;
    HierarchyTree::from_shape(&shape)
}

fn split(dist: &ndarray::Array2<f64>, classes: Vec<usize>) -> Result<Shape> {
    if classes.len() == 1 {
        return Ok(Shape::Leaf(classes[0]));
    }
    let sub = dist.select(ndarray::Axis(0), &classes).select(ndarray::Axis(1), &classes);
    let result = kmedoids::pam_with_distances(&sub, 2)?;
    // `classes` is ascending, so the left side holds the lowest class id.
    let left_cluster = result.assignment[0];
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (&class, &cluster) in classes.iter().zip(&result.assignment) {
        if cluster == left_cluster {
            left.push(class);
        } else {
            right.push(class);
        }
    }
    Ok(Shape::split(split(dist, left)?, split(dist, right)?))
}
