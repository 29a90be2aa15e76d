//! Class hierarchies: binary trees over the flat classes, induced by
//! clustering the class conditional means.
//!
//! A tree over `c` classes has `2c − 1` nodes. Node 0 is the root. Every
//! internal node has a left (position 0) and a right (position 1) child,
//! and every leaf carries exactly one class id. Trees produced by the
//! builders in this module are numbered breadth-first from the root, left
//! child before right, and the left child of every split is the side that
//! contains the lower class id.

mod agglomerative;
mod divisive;
mod kmedoids;

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use agglomerative::{agglomerate, build_agglomerative, Linkage, Merge};
pub use divisive::build_divisive;
pub use kmedoids::{clustering_cost, euclidean_distances, pam_kmedoids, pam_with_distances, Medoids};

/// Per-class mean vectors, one row per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub means: Array2<f64>,
    pub counts: Vec<usize>,
}

impl ClassMeans {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn space_dim(&self) -> usize {
        self.means.ncols()
    }
}

pub fn class_conditional_means(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
) -> Result<ClassMeans> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} outside 0..{n_classes}")));
    }
    let (means, counts, _) = crate::linalg::class_statistics(x, y, n_classes);
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "class {j} has no training instances"
        )));
    }
    Ok(ClassMeans { means, counts })
}

/// Child position under the parent: 0 = left, 1 = right.
pub type Position = u8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub index: usize,
    pub parent: Option<usize>,
    pub position: Option<Position>,
    pub children: Option<[usize; 2]>,
    pub leaf_class: Option<usize>,
}

/// Nested description of a binary tree, used to build and compare
/// topologies without caring about node numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Split(Box<Shape>, Box<Shape>),
}

impl Shape {
    pub fn split(left: Shape, right: Shape) -> Shape {
        Shape::Split(Box::new(left), Box::new(right))
    }

    pub fn min_class(&self) -> usize {
        match self {
            Shape::Leaf(c) => *c,
            Shape::Split(l, r) => l.min_class().min(r.min_class()),
        }
    }

    /// Children of every split ordered so the lower class id is on the left.
    pub fn canonical(self) -> Shape {
        match self {
            Shape::Leaf(c) => Shape::Leaf(c),
            Shape::Split(l, r) => {
                let (l, r) = (l.canonical(), r.canonical());
                if l.min_class() <= r.min_class() {
                    Shape::split(l, r)
                } else {
                    Shape::split(r, l)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Node>", into = "Vec<Node>")]
pub struct HierarchyTree {
    nodes: Vec<Node>,
    leaf_of_class: Vec<usize>,
}

impl TryFrom<Vec<Node>> for HierarchyTree {
    type Error = Error;

    fn try_from(nodes: Vec<Node>) -> Result<Self> {
        HierarchyTree::from_nodes(nodes)
    }
}

impl From<HierarchyTree> for Vec<Node> {
    fn from(t: HierarchyTree) -> Self {
        t.nodes
    }
}

impl HierarchyTree {
    /// Number a shape breadth-first from the root, left before right.
    pub fn from_shape(shape: &Shape) -> Result<Self> {
        let mut nodes = vec![Node {
            index: 0,
            parent: None,
            position: None,
            children: None,
            leaf_class: None,
        }];
        let mut queue = VecDeque::from([(shape, 0usize)]);
        while let Some((s, idx)) = queue.pop_front() {
            match s {
                Shape::Leaf(c) => nodes[idx].leaf_class = Some(*c),
                Shape::Split(l, r) => {
                    let base = nodes.len();
                    nodes[idx].children = Some([base, base + 1]);
                    for (pos, child) in [(0u8, l), (1u8, r)] {
                        nodes.push(Node {
                            index: base + pos as usize,
                            parent: Some(idx),
                            position: Some(pos),
                            children: None,
                            leaf_class: None,
                        });
                        queue.push_back((child, base + pos as usize));
                    }
                }
            }
        }
        HierarchyTree::from_nodes(nodes)
    }

    /// Build from explicit `(parent, left, right)` links and `(node, class)`
    /// leaf labels. Indices may follow any numbering with the root at 0.
    pub fn from_links(links: &[(usize, usize, usize)], leaves: &[(usize, usize)]) -> Result<Self> {
        let count = links.len() + leaves.len();
        let mut nodes: Vec<Node> = (0..count)
            .map(|index| Node {
                index,
                parent: None,
                position: None,
                children: None,
                leaf_class: None,
            })
            .collect();
        let check = |i: usize| {
            if i < count {
                Ok(i)
            } else {
                Err(Error::InvalidTree(format!("node {i} out of range 0..{count}")))
            }
        };
        for &(p, l, r) in links {
            let (p, l, r) = (check(p)?, check(l)?, check(r)?);
            nodes[p].children = Some([l, r]);
            for (pos, child) in [(0u8, l), (1u8, r)] {
                if nodes[child].parent.is_some() {
                    return Err(Error::InvalidTree(format!("node {child} has two parents")));
                }
                nodes[child].parent = Some(p);
                nodes[child].position = Some(pos);
            }
        }
        for &(node, class) in leaves {
            nodes[check(node)?].leaf_class = Some(class);
        }
        HierarchyTree::from_nodes(nodes)
    }

    /// Validate a node table.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidTree(msg));
        let leaves = nodes.iter().filter(|n| n.children.is_none()).count();
        if leaves < 2 {
            return bad(format!("{leaves} leaves; a hierarchy needs at least 2"));
        }
        if nodes.len() != 2 * leaves - 1 {
            return bad(format!(
                "{} nodes for {leaves} leaves (expected {})",
                nodes.len(),
                2 * leaves - 1
            ));
        }
        let mut leaf_of_class = vec![usize::MAX; leaves];
        for (i, node) in nodes.iter().enumerate() {
            if node.index != i {
                return bad(format!("node at slot {i} claims index {}", node.index));
            }
            match (node.children, node.leaf_class) {
                (Some([l, r]), None) => {
                    for (pos, child) in [(0u8, l), (1u8, r)] {
                        let Some(c) = nodes.get(child) else {
                            return bad(format!("node {i} links to missing child {child}"));
                        };
                        if c.parent != Some(i) || c.position != Some(pos) {
                            return bad(format!("child {child} does not point back to parent {i}"));
                        }
                    }
                }
                (None, Some(class)) => {
                    if class >= leaves {
                        return bad(format!("leaf class {class} outside 0..{leaves}"));
                    }
                    if leaf_of_class[class] != usize::MAX {
                        return bad(format!("class {class} appears on two leaves"));
                    }
                    leaf_of_class[class] = i;
                }
                (Some(_), Some(_)) => return bad(format!("internal node {i} carries a class")),
                (None, None) => return bad(format!("leaf {i} has no class")),
            }
            match (i, node.parent, node.position) {
                (0, None, None) => {}
                (0, _, _) => return bad("root must have no parent".into()),
                (_, Some(p), Some(pos)) => {
                    let linked = nodes
                        .get(p)
                        .and_then(|n| n.children)
                        .is_some_and(|ch| ch[pos as usize] == i);
                    if !linked {
                        return bad(format!("node {i} is not a child of its parent {p}"));
                    }
                }
                _ => return bad(format!("node {i} has no parent")),
            }
        }
        // Reachability from the root rules out cycles among the rest.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return bad(format!("node {i} reached twice"));
            }
            if let Some([l, r]) = nodes[i].children {
                stack.extend([r, l]);
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("some nodes are unreachable from the root".into());
        }
        Ok(HierarchyTree {
            nodes,
            leaf_of_class,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.leaf_of_class.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn is_leaf(&self, index: usize) -> bool {
        self.nodes[index].children.is_none()
    }

    pub fn children(&self, index: usize) -> Option<[usize; 2]> {
        self.nodes[index].children
    }

    pub fn leaf_node(&self, class: usize) -> usize {
        self.leaf_of_class[class]
    }

    /// Internal node indices, ascending.
    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.is_leaf(i)).collect()
    }

    /// Class ids under `index`, ascending.
    pub fn classes_under(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![index];
        while let Some(i) = stack.pop() {
            match (self.nodes[i].children, self.nodes[i].leaf_class) {
                (Some([l, r]), _) => stack.extend([l, r]),
                (None, Some(c)) => out.push(c),
                _ => unreachable!("validated tree"),
            }
        }
        out.sort_unstable();
        out
    }

    /// Number of edges between `index` and the root.
    pub fn depth(&self, mut index: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[index].parent {
            index = p;
            d += 1;
        }
        d
    }

    /// Whether both children of internal node `index` are leaves.
    pub fn has_only_leaf_children(&self, index: usize) -> bool {
        self.children(index)
            .is_some_and(|[l, r]| self.is_leaf(l) && self.is_leaf(r))
    }

    pub fn to_shape(&self) -> Shape {
        fn go(t: &HierarchyTree, i: usize) -> Shape {
            match t.nodes[i].children {
                Some([l, r]) => Shape::split(go(t, l), go(t, r)),
                None => Shape::Leaf(t.nodes[i].leaf_class.expect("validated leaf")),
            }
        }
        go(self, 0)
    }

    /// Whether indices follow the left-first breadth-first numbering.
    pub fn is_breadth_first(&self) -> bool {
        HierarchyTree::from_shape(&self.to_shape()).is_ok_and(|t| t == *self)
    }

    /// Same indices with every left/right pair swapped.
    pub fn mirrored(&self) -> HierarchyTree {
        let mut nodes = self.nodes.clone();
        for node in nodes.iter_mut() {
            if let Some([l, r]) = node.children {
                node.children = Some([r, l]);
            }
            node.position = node.position.map(|p| 1 - p);
        }
        HierarchyTree {
            nodes,
            leaf_of_class: self.leaf_of_class.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.nodes)?)
    }
}

/// One labeled element of a root-ward path: node, its parent, its own
/// child position, and the parent's child position (absent when the parent
/// is the root).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PathStep {
    pub node: usize,
    pub parent: usize,
    pub position: Position,
    pub parent_position: Option<Position>,
}

/// Path of a leaf up to (but excluding) the root, leaf first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodePath {
    pub leaf_class: usize,
    pub steps: Vec<PathStep>,
}

impl NodePath {
    pub fn p(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.node).collect()
    }

    pub fn q(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.parent).collect()
    }

    pub fn r(&self) -> Vec<Position> {
        self.steps.iter().map(|s| s.position).collect()
    }

    /// Parent child positions; one shorter than `p` since the root has none.
    pub fn s(&self) -> Vec<Position> {
        self.steps.iter().filter_map(|s| s.parent_position).collect()
    }

    /// The leaf's own step; the flat classifier supplies this factor in
    /// the hybrid scheme.
    pub fn terminal(&self) -> &PathStep {
        &self.steps[0]
    }

    /// Steps above the leaf, each decided by a hierarchical classifier.
    pub fn non_terminal(&self) -> &[PathStep] {
        &self.steps[1..]
    }
}

pub fn path_of(tree: &HierarchyTree, class: usize) -> Result<NodePath> {
    if class >= tree.n_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {class} not in tree over {} classes",
            tree.n_classes()
        )));
    }
    let mut steps = Vec::new();
    let mut cur = tree.leaf_node(class);
    while let (Some(parent), Some(position)) = (tree.node(cur).parent, tree.node(cur).position) {
        steps.push(PathStep {
            node: cur,
            parent,
            position,
            parent_position: tree.node(parent).position,
        });
        cur = parent;
    }
    Ok(NodePath {
        leaf_class: class,
        steps,
    })
}

/// Parenthesised Newick text with class names on the leaves.
pub fn export_newick(tree: &HierarchyTree, names: &[String]) -> String {
    fn go(t: &HierarchyTree, i: usize, names: &[String], out: &mut String) {
        match t.children(i) {
            Some([l, r]) => {
                out.push('(');
                go(t, l, names, out);
                out.push(',');
                go(t, r, names, out);
                out.push(')');
            }
            None => {
                let class = t.node(i).leaf_class.expect("validated leaf");
                let name = names.get(class).cloned().unwrap_or_else(|| class.to_string());
                out.push_str(&quote_label(&name));
            }
        }
    }
    let mut out = String::new();
    go(tree, 0, names, &mut out);
    out.push(';');
    out
}

fn quote_label(name: &str) -> String {
    let special = |ch: char| ch.is_whitespace() || "()[]',:;".contains(ch);
    if !name.is_empty() && !name.chars().any(special) {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

/// Stable short hash of a Newick string (first 16 hex digits of SHA-256).
pub fn tree_fingerprint(newick: &str) -> String {
    let digest = Sha256::digest(newick.as_bytes());
    hex::encode(&digest[..8])
}
